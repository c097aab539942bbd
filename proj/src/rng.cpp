#include "iddm/rng.hpp"

namespace iddm {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t stream_seed(std::uint64_t seed, const StreamKey& key, StreamPurpose purpose) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ static_cast<std::uint64_t>(purpose));
  h = mix64(h ^ key.run);
  h = mix64(h ^ key.cycle);
  h = mix64(h ^ key.step);
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, StreamKey key, StreamPurpose purpose)
    : seed_(seed), key_(key), purpose_(purpose), engine_(stream_seed(seed, key, purpose)) {}

RngStream RngStream::derive(StreamKey key, StreamPurpose purpose) const {
  return RngStream(seed_, key, purpose);
}

RngStream RngStream::with_step(std::uint64_t step) const {
  StreamKey k = key_;
  k.step = step;
  return derive(k);
}

RngStream RngStream::with_cycle(std::uint64_t cycle) const {
  StreamKey k = key_;
  k.cycle = cycle;
  return derive(k);
}

double RngStream::gaussian() { return normal_(engine_); }

double RngStream::uniform() { return unit_(engine_); }

}  // namespace iddm
