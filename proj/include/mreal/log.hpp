#pragma once

#include <spdlog/spdlog.h>

namespace mreal {

/// Applies the MREAL_LOG environment variable (trace/debug/info/warn/error/off)
/// to the default logger. Unset means "info".
void init_logging();

}  // namespace mreal
