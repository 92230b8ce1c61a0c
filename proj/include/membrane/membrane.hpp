#pragma once

// Everything at once.

#include "membrane/batch.hpp"
#include "membrane/error.hpp"
#include "membrane/extremes.hpp"
#include "membrane/greens.hpp"
#include "membrane/lattice.hpp"
#include "membrane/parallel.hpp"
#include "membrane/sampler.hpp"
#include "membrane/scheme.hpp"
#include "membrane/solver.hpp"
#include "membrane/splines.hpp"
#include "membrane/verify.hpp"
