#include "uhisr/persist.hpp"

#include <bit>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace uhisr {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

constexpr std::string_view kMagic = "UHISRMLP";
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put_f64(std::string& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::string_view take(std::size_t n) {
        if (bytes_.size() - pos_ < n) throw FormatError("parameter file is truncated");
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() {
        auto s = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << (8 * i);
        return v;
    }
    double f64() {
        auto s = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
        return std::bit_cast<double>(v);
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_params(std::span<const MlpParams> nets) {
    std::string out(kMagic);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(nets.size()));
    for (const auto& p : nets) {
        const MlpSpec& s = p.spec;
        put_u32(out, static_cast<std::uint32_t>(s.layers()));
        for (int n : s.sizes) put_u32(out, static_cast<std::uint32_t>(n));
        for (Activation a : s.activations) out += static_cast<char>(a);
        put_f64(out, s.leak);
        for (std::size_t l = 0; l < s.layers(); ++l) {
            const Matrix& W = p.weights[l];
            for (Eigen::Index r = 0; r < W.rows(); ++r)
                for (Eigen::Index c = 0; c < W.cols(); ++c) put_f64(out, W(r, c));
            for (Eigen::Index r = 0; r < p.biases[l].size(); ++r) put_f64(out, p.biases[l](r));
        }
    }
    return out;
}

std::vector<MlpParams> decode_params(std::string_view bytes) {
    Reader in(bytes);
    if (in.take(kMagic.size()) != kMagic) throw FormatError("not a parameter file (bad magic)");
    if (auto v = in.u32(); v != kVersion)
        throw FormatError("unsupported parameter file version " + std::to_string(v));
    const std::uint32_t count = in.u32();
    std::vector<MlpParams> nets;
    for (std::uint32_t k = 0; k < count; ++k) {
        MlpSpec s;
        const std::uint32_t layers = in.u32();
        if (layers == 0 || layers > 64) throw FormatError("implausible layer count");
        for (std::uint32_t l = 0; l <= layers; ++l) {
            std::uint32_t n = in.u32();
            if (n == 0 || n > (1u << 20)) throw FormatError("implausible layer size");
            s.sizes.push_back(static_cast<int>(n));
        }
        for (std::uint32_t l = 0; l < layers; ++l) {
            std::uint8_t a = in.u8();
            if (a > static_cast<std::uint8_t>(Activation::Sigmoid)) throw FormatError("unknown activation code");
            s.activations.push_back(static_cast<Activation>(a));
        }
        s.leak = in.f64();
        MlpParams p = zero_mlp(s);
        for (std::size_t l = 0; l < layers; ++l) {
            Matrix& W = p.weights[l];
            for (Eigen::Index r = 0; r < W.rows(); ++r)
                for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = in.f64();
            for (Eigen::Index r = 0; r < p.biases[l].size(); ++r) p.biases[l](r) = in.f64();
        }
        nets.push_back(std::move(p));
    }
    if (!in.done()) throw FormatError("trailing bytes after parameter data");
    return nets;
}

void save_params(const fs::path& path, std::span<const MlpParams> nets) {
    write_atomic(path, encode_params(nets));
}

std::vector<MlpParams> load_params(const fs::path& path) { return decode_params(read_file(path)); }

RunLock::RunLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw LockError("run directory '" + dir.string() + "' is locked by another command (" +
                            path_.string() + ")");
        throw LockError("cannot create lock '" + path_.string() + "': " + std::strerror(errno));
    }
    std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

}  // namespace uhisr
