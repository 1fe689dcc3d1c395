#ifndef GSAE_PREDICT_HPP
#define GSAE_PREDICT_HPP

#include "gsae/datamodel.hpp"
#include "gsae/eb.hpp"
#include "gsae/mcem.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace gsae {

struct AreaPrediction {
  eb::EbEstimate eb;
  bool in_sample = false;
  int n = 0;
  // NaN for out-of-sample areas.
  double mean_naive = 0.0;
};

struct PredictConfig {
  eb::GibbsConfig gibbs{};
  std::uint64_t seed = 1;
  int threads = 0;
  // Top-class midpoint for the naive estimator. EB never reads it.
  std::optional<double> naive_cg;
};

// Applies the model's covariate scaling, if any.
std::vector<AreaRecord> prepare_areas(std::span<const AreaRecord> areas, const FittedModel& model);

// Bundles a fit with the settings needed to reuse it.
FittedModel make_model(const mcem::FitResult& fit, const Thresholds& thresholds,
                       const ModelOptions& options, const CovariateScaling& scaling);

// EB estimates for every area: Gibbs chains on stream (kGibbs, i) for
// in-sample areas and prior predictions on stream (kPredict, i) otherwise,
// with i the row position. Naive means alongside for in-sample areas.
std::vector<AreaPrediction> predict_all(std::span<const AreaRecord> areas, const FittedModel& model,
                                        const PredictConfig& config);

}  // namespace gsae

#endif  // GSAE_PREDICT_HPP
