#include "gatelab/rng.hpp"

namespace gatelab {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::result_type Rng::operator()() {
  state_ += kGolden;
  return mix(state_);
}

Rng Rng::split() { return Rng(mix((*this)() ^ 0x5851f42d4c957f2dULL)); }

double Rng::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double Rng::normal() { return normal_(*this); }

std::uint64_t Rng::below(std::uint64_t n) {
  std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
  return dist(*this);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix(mix(seed + kGolden) ^ (tag * 0xd6e8feb86659fd93ULL));
}

}  // namespace gatelab
