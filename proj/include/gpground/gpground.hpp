#pragma once

#include "classifier.hpp"
#include "config.hpp"
#include "critical_lines.hpp"
#include "error.hpp"
#include "frame_io.hpp"
#include "gp_core.hpp"
#include "hyperopt.hpp"
#include "line_fit.hpp"
#include "polar_grid.hpp"
#include "synth_eval.hpp"
#include "types.hpp"

namespace gpground {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gpground
