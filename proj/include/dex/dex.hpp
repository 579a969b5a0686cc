#pragma once

// Umbrella header: dynamic edge-exchangeable temporal network model with
// generative simulation, structured mean-field variational inference, and a
// link-prediction evaluation harness.

#include "dex/baselines.hpp"
#include "dex/checkpoint.hpp"
#include "dex/elbo.hpp"
#include "dex/errors.hpp"
#include "dex/evaluate.hpp"
#include "dex/fit.hpp"
#include "dex/gauss_chain.hpp"
#include "dex/generative.hpp"
#include "dex/math.hpp"
#include "dex/metrics.hpp"
#include "dex/model.hpp"
#include "dex/predict.hpp"
#include "dex/rng.hpp"
#include "dex/shifted_poisson.hpp"
#include "dex/temporal_network.hpp"
#include "dex/variational.hpp"
