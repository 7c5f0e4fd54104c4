#pragma once

// Everything in one include.

#include "quakesr/core/errors.hpp"
#include "quakesr/core/parallel.hpp"
#include "quakesr/core/rng.hpp"
#include "quakesr/core/stats.hpp"
#include "quakesr/eval/metrics.hpp"
#include "quakesr/eval/predict.hpp"
#include "quakesr/eval/report.hpp"
#include "quakesr/inference/problem.hpp"
#include "quakesr/io/bundle.hpp"
#include "quakesr/io/checkpoint.hpp"
#include "quakesr/io/config.hpp"
#include "quakesr/io/csv.hpp"
#include "quakesr/io/results.hpp"
#include "quakesr/loss/crps_experiment.hpp"
#include "quakesr/loss/loss.hpp"
#include "quakesr/loss/scoring.hpp"
#include "quakesr/mcmc/engine.hpp"
#include "quakesr/model/params.hpp"
#include "quakesr/model/simulator.hpp"
#include "quakesr/model/types.hpp"
#include "quakesr/model/vulnerability.hpp"
#include "quakesr/prior/prior.hpp"
#include "quakesr/smc/engine.hpp"
#include "quakesr/synth/generator.hpp"
