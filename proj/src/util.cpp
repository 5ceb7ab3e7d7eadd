#include "uen/util.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "json.hpp"

namespace uen {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::size_t sample_discrete(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) return weights.size();
  const double target = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = weights.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  return sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("write failed: " + path.string());
}

void ByteWriter::u32(std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf_.append(b, 4);
}

void ByteWriter::f32(float v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf_.append(b, 4);
}

void ByteWriter::f64(double v) {
  char b[8];
  std::memcpy(b, &v, 8);
  buf_.append(b, 8);
}

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void ByteWriter::f32s(std::span<const float> v) {
  buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
}

std::string_view ByteReader::bytes(std::size_t n) {
  if (n > data_.size() - pos_) throw FormatError(what_ + ": truncated file");
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v;
  std::memcpy(&v, bytes(4).data(), 4);
  return v;
}

float ByteReader::f32() {
  float v;
  std::memcpy(&v, bytes(4).data(), 4);
  return v;
}

double ByteReader::f64() {
  double v;
  std::memcpy(&v, bytes(8).data(), 8);
  return v;
}

std::string ByteReader::str() {
  const auto n = u32();
  return std::string(bytes(n));
}

void ByteReader::f32s(std::span<float> out) {
  auto b = bytes(out.size() * sizeof(float));
  std::memcpy(out.data(), b.data(), b.size());
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

void write_with_sidecar(const std::filesystem::path& path, std::string_view payload, const std::string& meta_json) {
  auto meta = nlohmann::ordered_json::parse(meta_json);
  meta["sha256"] = sha256_hex(payload);
  write_file(path, payload);
  write_file(sidecar_path(path), meta.dump(2) + "\n");
}

std::string read_verified(const std::filesystem::path& path) {
  std::string payload = read_file(path);
  const auto side = sidecar_path(path);
  if (!std::filesystem::exists(side)) {
    throw ChecksumError(path.string() + ": missing checksum sidecar " + side.string());
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(side));
  } catch (const nlohmann::json::exception& e) {
    throw ChecksumError(side.string() + ": unreadable sidecar: " + e.what());
  }
  if (!meta.contains("sha256") || !meta["sha256"].is_string()) {
    throw ChecksumError(side.string() + ": sidecar has no sha256 field");
  }
  if (meta["sha256"].get<std::string>() != sha256_hex(payload)) {
    throw ChecksumError(path.string() + ": checksum mismatch");
  }
  return payload;
}

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::Info)};
std::mutex g_log_mutex;
}  // namespace

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }
LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log(LogLevel level, std::string_view message) {
  if (static_cast<int>(level) < g_level.load()) return;
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(g_log_mutex);
  std::cerr << "[" << kNames[static_cast<int>(level)] << "] " << message << "\n";
}

}  // namespace uen
