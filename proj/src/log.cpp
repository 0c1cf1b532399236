#include "coupledfuse/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace cfuse::log {

namespace {

Level parse_env() {
    const char* raw = std::getenv("COUPLED_FUSE_LOG");
    if (raw == nullptr) return Level::Warn;
    if (std::strcmp(raw, "error") == 0) return Level::Error;
    if (std::strcmp(raw, "warn") == 0) return Level::Warn;
    if (std::strcmp(raw, "info") == 0) return Level::Info;
    if (std::strcmp(raw, "debug") == 0) return Level::Debug;
    std::fprintf(stderr, "[coupled-fuse][warn] unrecognized COUPLED_FUSE_LOG value '%s', using 'warn'\n", raw);
    return Level::Warn;
}

Level& threshold_ref() {
    static Level current = parse_env();
    return current;
}

const char* label(Level level) {
    switch (level) {
        case Level::Error: return "error";
        case Level::Warn: return "warn";
        case Level::Info: return "info";
        case Level::Debug: return "debug";
    }
    return "?";
}

}  // namespace

Level threshold() { return threshold_ref(); }

void set_threshold(Level level) { threshold_ref() = level; }

void write(Level level, const std::string& message) {
    if (static_cast<int>(level) > static_cast<int>(threshold_ref())) return;
    std::fprintf(stderr, "[coupled-fuse][%s] %s\n", label(level), message.c_str());
}

}  // namespace cfuse::log
