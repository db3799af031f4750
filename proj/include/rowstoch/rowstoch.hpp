#pragma once

#include "rowstoch/algorithms.hpp"
#include "rowstoch/analysis.hpp"
#include "rowstoch/digraph.hpp"
#include "rowstoch/errors.hpp"
#include "rowstoch/harness.hpp"
#include "rowstoch/linalg.hpp"
#include "rowstoch/objectives.hpp"
#include "rowstoch/plot.hpp"
#include "rowstoch/rng.hpp"
#include "rowstoch/spectral.hpp"
#include "rowstoch/trace_io.hpp"
#include "rowstoch/verify.hpp"
