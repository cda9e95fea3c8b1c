#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "deconv/engine.hpp"
#include "deconv/errors.hpp"

namespace deconv {

/// CRC-32 (IEEE 802.3, reflected, init/final 0xFFFFFFFF).
inline std::uint32_t crc32(std::span<const std::uint8_t> data) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t byte : data) crc = table[(crc ^ byte) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw checkpoint_error("checkpoint truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline constexpr std::array<std::uint8_t, 4> kCheckpointMagic = {'N', 'W', 'T', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serializes the full estimator state. Little-endian throughout; doubles
/// are raw IEEE-754 bit patterns, so save/load round trips are bit-exact.
/// Layout: magic "NWTN", version u32, atom count u64 + (mean, variance)
/// pairs, schedule (alpha, gamma), noise (family u32, std_dev), n u64,
/// pmf weights, trailing CRC32 over everything before it.
inline std::vector<std::uint8_t> checkpoint_save(const EstimatorState& state) {
  std::vector<std::uint8_t> out;
  const std::size_t k = state.grid().size();
  out.reserve(4 + 4 + 8 + 16 * k + 16 + 12 + 8 + 8 * k + 4);
  for (std::uint8_t b : kCheckpointMagic) out.push_back(b);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, k);
  for (const auto& atom : state.grid().atoms()) {
    detail::put_f64(out, atom.mean);
    detail::put_f64(out, atom.variance);
  }
  detail::put_f64(out, state.schedule().alpha);
  detail::put_f64(out, state.schedule().gamma);
  detail::put_u32(out, state.noise().family == NoiseFamily::laplace ? 0u : 1u);
  detail::put_f64(out, state.noise().std_dev);
  detail::put_u64(out, state.count());
  for (double w : state.pmf().weights()) detail::put_f64(out, w);
  detail::put_u32(out, crc32(out));
  return out;
}

inline EstimatorState checkpoint_load(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 4 + 8 + 4) throw checkpoint_error("checkpoint truncated");
  for (std::size_t i = 0; i < 4; ++i)
    if (bytes[i] != kCheckpointMagic[i]) throw checkpoint_error("bad checkpoint magic");

  // Verify the trailing checksum before trusting any field.
  detail::Reader crc_reader(bytes.subspan(bytes.size() - 4));
  const std::uint32_t stored_crc = crc_reader.u32();
  if (crc32(bytes.first(bytes.size() - 4)) != stored_crc)
    throw checkpoint_error("checkpoint checksum mismatch");

  detail::Reader r(bytes.first(bytes.size() - 4));
  r.u32();  // magic, verified above
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw checkpoint_error("unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t k = r.u64();
  if (k == 0 || k > (bytes.size() / 16))  // cheap sanity bound before allocating
    throw checkpoint_error("checkpoint atom count inconsistent with stream size");
  std::vector<ThetaAtom> atoms(k);
  for (auto& atom : atoms) {
    atom.mean = r.f64();
    atom.variance = r.f64();
  }
  LearningRateSchedule schedule{r.f64(), r.f64()};
  const std::uint32_t family = r.u32();
  if (family > 1) throw checkpoint_error("unknown noise family code in checkpoint");
  NoiseModel noise{family == 0 ? NoiseFamily::laplace : NoiseFamily::gaussian, r.f64()};
  const std::uint64_t n = r.u64();
  std::vector<double> weights(k);
  for (auto& w : weights) w = r.f64();
  if (r.remaining() != 0) throw checkpoint_error("checkpoint has trailing bytes");

  try {
    return EstimatorState(ParameterGrid(std::move(atoms)),
                          MixingPmf::from_weights(std::move(weights)), schedule, noise, n);
  } catch (const error& e) {
    throw checkpoint_error(std::string("checkpoint payload invalid: ") + e.what());
  }
}

inline void checkpoint_write_file(const EstimatorState& state, const std::string& path) {
  const auto bytes = checkpoint_save(state);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot open checkpoint file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw data_error("failed writing checkpoint file: " + path);
}

inline EstimatorState checkpoint_read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open checkpoint file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return checkpoint_load(bytes);
}

}  // namespace deconv
