#pragma once

/**
 * @file gsema.hpp
 * @brief Umbrella header for the pathway-level meta-analysis library.
 */

#include "gsema/effects.hpp"
#include "gsema/error.hpp"
#include "gsema/io.hpp"
#include "gsema/meta.hpp"
#include "gsema/model.hpp"
#include "gsema/panel.hpp"
#include "gsema/parallel.hpp"
#include "gsema/pipeline.hpp"
#include "gsema/report.hpp"
#include "gsema/rng.hpp"
#include "gsema/simulate.hpp"
#include "gsema/sse.hpp"
#include "gsema/stats.hpp"
#include "gsema/tsv.hpp"
