#pragma once

#include "riskmp/adjoint.hpp"
#include "riskmp/brownian.hpp"
#include "riskmp/control.hpp"
#include "riskmp/errors.hpp"
#include "riskmp/feasibility.hpp"
#include "riskmp/model.hpp"
#include "riskmp/numeric.hpp"
#include "riskmp/parallel.hpp"
#include "riskmp/policy.hpp"
#include "riskmp/portfolio.hpp"
#include "riskmp/problems.hpp"
#include "riskmp/regression.hpp"
#include "riskmp/risk.hpp"
#include "riskmp/rng.hpp"
#include "riskmp/simulate.hpp"
#include "riskmp/time_grid.hpp"
#include "riskmp/verify.hpp"
