#ifndef GSAE_RANDOM_HPP
#define GSAE_RANDOM_HPP

#include <boost/random/mersenne_twister.hpp>

#include <cstdint>

namespace gsae {

// Named sub-streams. Every random quantity in the library is drawn from a
// stream keyed by (purpose, area, iteration, replicate) under one master
// seed, so results do not depend on the parallel schedule.
enum class Purpose : std::uint64_t {
  kEisFit = 1,
  kSir = 2,
  kGibbs = 3,
  kPredict = 4,
  kBootstrap = 5,
  kPopulation = 6,
  kSampling = 7,
  kCovariates = 8,
  kMarginalLik = 9,
  kLocalFit = 10,
};

std::uint64_t mix_seed(std::uint64_t master, Purpose purpose, std::uint64_t area,
                       std::uint64_t iteration, std::uint64_t replicate);

class Rng {
 public:
  using engine_type = boost::random::mt19937_64;

  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  static Rng stream(std::uint64_t master, Purpose purpose, std::uint64_t area = 0,
                    std::uint64_t iteration = 0, std::uint64_t replicate = 0) {
    return Rng(mix_seed(master, purpose, area, iteration, replicate));
  }

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential();
  // Gamma with unit scale.
  double gamma(double shape);
  // IG(shape, scale), i.e. scale / Gamma(shape, 1).
  double inverse_gamma(double shape, double scale) { return scale / gamma(shape); }
  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

  engine_type& engine() { return eng_; }

 private:
  engine_type eng_;
};

}  // namespace gsae

#endif  // GSAE_RANDOM_HPP
