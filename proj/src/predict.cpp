#include "gsae/predict.hpp"

#include "gsae/baseline.hpp"
#include "gsae/parallel.hpp"

#include <limits>

namespace gsae {

std::vector<AreaRecord> prepare_areas(std::span<const AreaRecord> areas, const FittedModel& model) {
  std::vector<AreaRecord> out(areas.begin(), areas.end());
  if (!model.scaling.empty()) model.scaling.apply_inplace(out);
  for (const auto& a : out) {
    if (a.x.size() != model.psi.p()) {
      throw ValidationError("area '" + a.id + "' has " + std::to_string(a.x.size()) +
                            " covariates but the model expects " + std::to_string(model.psi.p()));
    }
  }
  validate_areas(out, model.thresholds);
  return out;
}

FittedModel make_model(const mcem::FitResult& fit, const Thresholds& thresholds,
                       const ModelOptions& options, const CovariateScaling& scaling) {
  FittedModel m;
  m.thresholds = thresholds;
  m.options = options;
  m.psi = fit.psi;
  m.scaling = scaling;
  m.converged = fit.converged;
  m.iterations = fit.iterations;
  m.trace = fit.trace;
  return m;
}

std::vector<AreaPrediction> predict_all(std::span<const AreaRecord> raw, const FittedModel& model,
                                        const PredictConfig& config) {
  config.gibbs.validate();
  const auto areas = prepare_areas(raw, model);
  validate(model.psi, areas);
  const baseline::Midpoints mid(model.thresholds, config.naive_cg);
  std::vector<AreaPrediction> out(areas.size());
  parallel_for(areas.size(), config.threads, [&](std::size_t i) {
    const auto& a = areas[i];
    auto& row = out[i];
    row.in_sample = a.in_sample();
    if (a.in_sample()) {
      Rng rng = Rng::stream(config.seed, Purpose::kGibbs, i);
      row.eb = eb::eb_estimate(a, model.psi, model.thresholds, model.options, config.gibbs, rng);
      row.n = a.sample->n();
      row.mean_naive = baseline::naive_mean(*a.sample, mid);
    } else {
      Rng rng = Rng::stream(config.seed, Purpose::kPredict, i);
      row.eb = eb::predict_out_of_sample(a, model.psi, model.thresholds, model.options,
                                         config.gibbs.iterations, config.gibbs.compute_gini, rng);
      row.mean_naive = std::numeric_limits<double>::quiet_NaN();
    }
  });
  return out;
}

}  // namespace gsae
