#pragma once

#include "uhisr/hiernet.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace uhisr {

enum ExitCode : int {
    kExitOk = 0,
    kExitInput = 2,
    kExitMissingArtifact = 3,
    kExitAcceptance = 4,
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat `key = value` lines; `#` starts a comment.
std::map<std::string, std::string> parse_config_text(std::string_view text);

struct RunConfig {
    std::filesystem::path data;
    std::filesystem::path out;
    std::uint64_t seed = 0;
    std::array<TrainConfig, 3> train{};
    /// Keys starting with "sr." kept for per-level application.
    std::map<std::string, std::string> sr;

    /// Applies known keys; unknown keys raise ConfigError.
    void apply(const std::map<std::string, std::string>& values);
    void apply_sr(SRConfig& cfg, const LevelSpec& level) const;
};

/// Runs the command line; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace uhisr
