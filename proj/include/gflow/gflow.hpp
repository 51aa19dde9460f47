#pragma once

#include "gflow/version.hpp"
#include "gflow/error.hpp"
#include "gflow/grid.hpp"
#include "gflow/tridiagonal.hpp"
#include "gflow/interpolation.hpp"
#include "gflow/density.hpp"
#include "gflow/rng.hpp"
#include "gflow/targets.hpp"
#include "gflow/fokker_planck.hpp"
#include "gflow/particles.hpp"
#include "gflow/mlp.hpp"
#include "gflow/gan.hpp"
