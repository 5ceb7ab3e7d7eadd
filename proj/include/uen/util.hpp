#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace uen {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a documented format or referential constraint.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Stored checksum does not match file contents.
class ChecksumError : public Error {
 public:
  using Error::Error;
};

/// Shapes or dimensions disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// SplitMix64 step, used both as a seed mixer and as a stream derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xD1B54A32D192ED03ULL));
}

/// xoshiro256** generator. Output is bit-identical across platforms and
/// standard libraries, unlike the <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) {
      x = splitmix64(x);
      s = x;
    }
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Lemire's method with rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw Error("Rng::below(0)");
    std::uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = next();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4]{};
};

/// Sample an index from unnormalized non-negative weights. Returns
/// weights.size() when every weight is zero.
std::size_t sample_discrete(std::span<const double> weights, Rng& rng);

// ---------------------------------------------------------------------------
// Hashing and checksums
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Little-endian binary writer over an in-memory buffer.
class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.append(s); }
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void str(std::string_view s);  // u32 length prefix + bytes
  void f32s(std::span<const float> v);
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

/// Bounds-checked little-endian reader. Truncation raises FormatError naming `what`.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}
  std::string_view bytes(std::size_t n);
  std::uint32_t u32();
  float f32();
  double f64();
  std::string str();
  void f32s(std::span<float> out);
  bool at_end() const { return pos_ == data_.size(); }
  const std::string& what() const { return what_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string what_;
};

/// Write `payload` to `path` and a JSON sidecar `path + ".json"` holding
/// `meta` merged with {"sha256": <hex of payload>}.
void write_with_sidecar(const std::filesystem::path& path, std::string_view payload,
                        const std::string& meta_json);

/// Read `path`, verify it against its sidecar checksum, return the bytes.
std::string read_verified(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Logging
// ---------------------------------------------------------------------------

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Silent = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();
void log(LogLevel level, std::string_view message);
inline void log_info(std::string_view m) { log(LogLevel::Info, m); }
inline void log_warn(std::string_view m) { log(LogLevel::Warn, m); }

}  // namespace uen
