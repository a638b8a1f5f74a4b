#pragma once

#include <string>

namespace simo::log {

enum class Level { error = 0, info = 1, debug = 2 };

/// Current level, initialized once from the SIMO_LOG env var
/// (error|info|debug, default info).
Level level();

void set_level(Level lvl);

void error(const std::string& msg);
void info(const std::string& msg);
void debug(const std::string& msg);

}  // namespace simo::log
