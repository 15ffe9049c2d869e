#pragma once

#include "blab/errors.hpp"
#include "blab/matrix.hpp"
#include "blab/rng.hpp"
#include "blab/prob.hpp"
#include "blab/bottleneck.hpp"
#include "blab/fixed_point.hpp"
#include "blab/solve.hpp"
#include "blab/theory.hpp"
#include "blab/experiments.hpp"
#include "blab/io.hpp"
#include "blab/cli.hpp"
