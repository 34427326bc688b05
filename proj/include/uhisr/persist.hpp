#pragma once

#include "uhisr/neural.hpp"

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace uhisr {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Writes to a temporary sibling then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Binary bundle of MLPs: magic, version, count, then per network the layer
/// sizes, activation codes, leak slope and row-major weights followed by
/// the bias, layer by layer. All numbers little-endian.
std::string encode_params(std::span<const MlpParams> nets);
std::vector<MlpParams> decode_params(std::string_view bytes);
void save_params(const std::filesystem::path& path, std::span<const MlpParams> nets);
std::vector<MlpParams> load_params(const std::filesystem::path& path);

class LockError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exclusive lock on a run directory, held for the object's lifetime.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
};

}  // namespace uhisr
