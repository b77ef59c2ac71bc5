#pragma once

#include <array>
#include <cstdint>

namespace nope {

/// One block of the Philox4x32-10 counter-based generator.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Deterministic random stream keyed by (master_seed, stream_id).
///
/// The master seed is the Philox key; the stream id occupies the upper half
/// of the 128-bit counter and the draw index the lower half. Streams with
/// different ids therefore walk disjoint counter ranges, and a stream's
/// output never depends on how many other streams exist or in which order
/// they are consumed.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double next_uniform();
  /// Uniform on (0, 1).
  double next_open_uniform();
  /// Standard normal (Box-Muller).
  double next_normal();
  /// Uniform integer in [0, bound), bound > 0.
  std::uint64_t next_below(std::uint64_t bound);

 private:
  void refill();

  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nope
