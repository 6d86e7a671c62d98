#pragma once

// Umbrella header: the whole library.

#include "lobkit/book.hpp"
#include "lobkit/estimate.hpp"
#include "lobkit/event_log_io.hpp"
#include "lobkit/generator.hpp"
#include "lobkit/intensity.hpp"
#include "lobkit/manifest.hpp"
#include "lobkit/market_csv.hpp"
#include "lobkit/model_config.hpp"
#include "lobkit/rank.hpp"
#include "lobkit/report_io.hpp"
#include "lobkit/rng.hpp"
#include "lobkit/simulate.hpp"
#include "lobkit/stability.hpp"
#include "lobkit/stationary.hpp"
#include "lobkit/stats.hpp"
