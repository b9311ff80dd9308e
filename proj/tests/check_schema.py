#!/usr/bin/env python3
"""Run a few CLI commands, validate every JSON report and the checksum manifests.

usage: check_schema.py <agmon> <report.schema.json> <work dir>
"""
import hashlib
import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema

RUNS = {
    "certify_bp": ["certify", "--class", "bp", "--weight", "appendix_a", "--size", "small"],
    "certify_cross": ["certify", "--class", "cross", "--weight", "identity", "--size", "small"],
    "counterexample": ["counterexample", "--size", "small"],
    "aux": ["aux", "--weight", "diag_ordered", "--grid", "9,1.5", "--size", "small"],
    "green": ["green", "--weight", "identity", "--grid", "9,1", "--size", "small"],
    "poincare": ["poincare", "--weight", "identity", "--size", "small"],
    "all": ["all", "--size", "small"],
}


def check_manifest(out):
    manifest = out / "MANIFEST.sha256"
    listed = {}
    for line in manifest.read_text().splitlines():
        digest, name = line.split("  ", 1)
        listed[name] = digest
    files = {p.name for p in out.iterdir() if p.is_file() and p.name != "MANIFEST.sha256"}
    errors = []
    if set(listed) != files:
        errors.append(f"manifest lists {sorted(listed)} but directory has {sorted(files)}")
    for name, digest in listed.items():
        path = out / name
        if path.exists() and hashlib.sha256(path.read_bytes()).hexdigest() != digest:
            errors.append(f"{name}: checksum mismatch")
    return errors


def main():
    cli, schema_path, work = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    schema = json.loads(schema_path.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    shutil.rmtree(work, ignore_errors=True)
    failures = 0
    for tag, args in RUNS.items():
        out = work / tag
        cmd = [cli, "--quiet", "--seed", "1", "--out", str(out)] + args
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0:
            print(f"FAIL {tag}: exit {proc.returncode}: {proc.stderr.strip()}")
            failures += 1
            continue
        problems = []
        reports = sorted(out.glob("*.json"))
        if not reports:
            problems.append("no JSON report written")
        for report in reports:
            doc = json.loads(report.read_text())
            for err in validator.iter_errors(doc):
                problems.append(f"{report.name}: {'/'.join(map(str, err.path))}: {err.message}")
            if doc.get("config", {}).get("command") != args[0]:
                problems.append(f"{report.name}: config does not echo the command")
        problems += check_manifest(out)
        for p in problems:
            print(f"FAIL {tag}: {p}")
        if problems:
            failures += 1
        else:
            print(f"ok   {tag}: {len(reports)} report(s) valid, manifest verified")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
