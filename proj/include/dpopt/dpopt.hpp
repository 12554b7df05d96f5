#pragma once

// Differentially private optimization toolkit: per-sample clipping, Gaussian
// noising, DP optimizers with optional noise decay, RDP and tCDP privacy
// accounting, imbalance-aware sampling, and the experiment harness.

#include "dpopt/accountant.hpp"
#include "dpopt/dataset.hpp"
#include "dpopt/format.hpp"
#include "dpopt/harness.hpp"
#include "dpopt/linalg.hpp"
#include "dpopt/metrics.hpp"
#include "dpopt/model.hpp"
#include "dpopt/optimizer.hpp"
#include "dpopt/rng.hpp"
#include "dpopt/sampling.hpp"
#include "dpopt/trainer.hpp"
