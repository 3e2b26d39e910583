#pragma once

#include "randproj/adaptivity.hpp"
#include "randproj/config.hpp"
#include "randproj/errors.hpp"
#include "randproj/experiments.hpp"
#include "randproj/fem.hpp"
#include "randproj/mesh.hpp"
#include "randproj/parallel.hpp"
#include "randproj/polybasis.hpp"
#include "randproj/projectors.hpp"
#include "randproj/random.hpp"
#include "randproj/rhs_library.hpp"
#include "randproj/sampling.hpp"
#include "randproj/stats.hpp"
#include "randproj/verification.hpp"
