#pragma once

// Umbrella header for the full toolkit.

#include "nplb/cohort.hpp"
#include "nplb/distance.hpp"
#include "nplb/error.hpp"
#include "nplb/eval.hpp"
#include "nplb/losses.hpp"
#include "nplb/matrix.hpp"
#include "nplb/model.hpp"
#include "nplb/random.hpp"
#include "nplb/risk.hpp"
#include "nplb/stats.hpp"
#include "nplb/trainer.hpp"
