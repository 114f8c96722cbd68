#pragma once

#include "tabunc/core/artifact.hpp"
#include "tabunc/core/error.hpp"
#include "tabunc/core/gradcheck.hpp"
#include "tabunc/core/io.hpp"
#include "tabunc/core/layers.hpp"
#include "tabunc/core/matrix.hpp"
#include "tabunc/core/optimizer.hpp"
#include "tabunc/core/rng.hpp"

#include "tabunc/data/cache.hpp"
#include "tabunc/data/csv.hpp"
#include "tabunc/data/dataset.hpp"
#include "tabunc/data/generators.hpp"

#include "tabunc/models/builders.hpp"
#include "tabunc/models/checkpoint.hpp"
#include "tabunc/models/ensemble.hpp"
#include "tabunc/models/gradcheck.hpp"
#include "tabunc/models/model.hpp"
#include "tabunc/models/nca.hpp"
#include "tabunc/models/spec.hpp"
#include "tabunc/models/zoo.hpp"

#include "tabunc/train/losses.hpp"
#include "tabunc/train/trainer.hpp"
#include "tabunc/train/triplet.hpp"
#include "tabunc/train/tuner.hpp"

#include "tabunc/uncertainty/estimator.hpp"

#include "tabunc/analysis/gradients.hpp"
#include "tabunc/analysis/neighbors.hpp"
#include "tabunc/analysis/plots.hpp"
#include "tabunc/analysis/smoothing.hpp"
#include "tabunc/analysis/stats.hpp"
#include "tabunc/analysis/svg.hpp"

#include "tabunc/lab/config.hpp"
#include "tabunc/lab/figures.hpp"
#include "tabunc/lab/runner.hpp"
