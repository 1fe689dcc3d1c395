#include "gsae/random.hpp"

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace gsae {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t master, Purpose purpose, std::uint64_t area,
                       std::uint64_t iteration, std::uint64_t replicate) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ area);
  h = splitmix64(h ^ iteration);
  h = splitmix64(h ^ replicate);
  return h;
}

double Rng::uniform() {
  // 53 random bits centred in their cell, never 0 or 1.
  return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() { return boost::random::normal_distribution<double>(0.0, 1.0)(eng_); }

double Rng::exponential() { return boost::random::exponential_distribution<double>(1.0)(eng_); }

double Rng::gamma(double shape) {
  return boost::random::gamma_distribution<double>(shape, 1.0)(eng_);
}

std::uint64_t Rng::below(std::uint64_t n) {
  return boost::random::uniform_int_distribution<std::uint64_t>(0, n - 1)(eng_);
}

}  // namespace gsae
