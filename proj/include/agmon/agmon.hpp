#pragma once

#include "agmon/auxmetric.hpp"
#include "agmon/catalog.hpp"
#include "agmon/classes.hpp"
#include "agmon/cubature.hpp"
#include "agmon/errors.hpp"
#include "agmon/fieldio.hpp"
#include "agmon/grid.hpp"
#include "agmon/ineqlab.hpp"
#include "agmon/parallel.hpp"
#include "agmon/pde.hpp"
#include "agmon/polynomial.hpp"
#include "agmon/report.hpp"
#include "agmon/serialize.hpp"
#include "agmon/symmat.hpp"
#include "agmon/weights.hpp"
