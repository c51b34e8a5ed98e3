#pragma once

#include "liftcut/common.hpp"
#include "liftcut/demo_loop.hpp"
#include "liftcut/ellipsoid_cuts.hpp"
#include "liftcut/fixed_rho.hpp"
#include "liftcut/generate.hpp"
#include "liftcut/io.hpp"
#include "liftcut/model.hpp"
#include "liftcut/oracle.hpp"
#include "liftcut/paraboloid_cuts.hpp"
#include "liftcut/poly_cuts.hpp"
#include "liftcut/qp.hpp"
