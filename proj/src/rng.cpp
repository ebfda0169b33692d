#include "sfperc/rng.hpp"

namespace sfperc {

namespace {

std::seed_seq make_seed_seq(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
  auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x & 0xffffffffu); };
  auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
  return std::seed_seq{lo(seed), hi(seed), lo(stream), hi(stream), lo(substream), hi(substream)};
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream)
    : seed_(seed), stream_(stream) {
  auto seq = make_seed_seq(seed, stream, substream);
  engine_.seed(seq);
}

}  // namespace sfperc
