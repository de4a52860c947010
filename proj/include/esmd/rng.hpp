#pragma once

#include <cstdint>
#include <random>

namespace esmd {

// Splittable stream: the draws depend only on (seed, stream_id), never on
// how many other streams were created or consumed before.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  // Child stream keyed by `key`; independent of this stream's position.
  RngStream fork(std::uint64_t key) const;

  // Fresh copy positioned at the start of the stream.
  RngStream restarted() const { return RngStream(seed_, stream_id_); }

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gaussian();
  std::uint64_t below(std::uint64_t bound);  // [0, bound)

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace esmd
