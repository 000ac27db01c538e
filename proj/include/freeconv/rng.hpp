#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace freeconv {

// Philox4x32-10 counter-based generator. The key is the master seed and the
// upper counter words hold the stream id, so (seed, stream) selects an
// independent, reproducible sequence without sequential handoff.
class RngStream {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  std::uint64_t master_seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  // Philox4x32-10 bijection, exposed for known-answer tests.
  static Block philox(Block counter, std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int index_ = 4;
};

}  // namespace freeconv
