#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sfperc {

// Seeded random stream. A stream is identified by (seed, stream, substream),
// so trial t of an experiment with user seed s always sees the same numbers
// regardless of which worker runs it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  // Independent stream keyed on the same (seed, stream) pair.
  Rng derive(std::uint64_t substream) const { return Rng(seed_, stream_, substream); }

  std::uint64_t next() { return engine_(); }

  // Uniform on (0, 1]; never returns 0, so -log(u) is finite and "u <= p"
  // is never true for p = 0.
  double uniform() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    auto product = static_cast<unsigned __int128>(engine_()) * bound;
    return static_cast<std::uint64_t>(product >> 64);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  bool bernoulli(double p) { return uniform() <= p; }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

}  // namespace sfperc
