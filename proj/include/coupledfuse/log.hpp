#pragma once

#include <string>

namespace cfuse::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Current threshold. Initialized once from the COUPLED_FUSE_LOG environment
/// variable (error|warn|info|debug, default warn); messages above the
/// threshold are dropped.
Level threshold();

/// Override the threshold programmatically (tests, CLI flags).
void set_threshold(Level level);

/// Write one line to stderr if `level` passes the threshold.
void write(Level level, const std::string& message);

inline void error(const std::string& m) { write(Level::Error, m); }
inline void warn(const std::string& m) { write(Level::Warn, m); }
inline void info(const std::string& m) { write(Level::Info, m); }
inline void debug(const std::string& m) { write(Level::Debug, m); }

}  // namespace cfuse::log
