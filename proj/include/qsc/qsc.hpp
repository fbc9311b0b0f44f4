#pragma once

#include "qsc/accelerated_newton.hpp"
#include "qsc/checks.hpp"
#include "qsc/composite.hpp"
#include "qsc/data.hpp"
#include "qsc/dual_newton.hpp"
#include "qsc/errors.hpp"
#include "qsc/linalg.hpp"
#include "qsc/oracle.hpp"
#include "qsc/phi.hpp"
#include "qsc/primal_newton.hpp"
#include "qsc/problems.hpp"
