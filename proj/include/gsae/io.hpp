#ifndef GSAE_IO_HPP
#define GSAE_IO_HPP

#include "gsae/bootstrap.hpp"
#include "gsae/datamodel.hpp"
#include "gsae/predict.hpp"
#include "gsae/simulation.hpp"

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsae::io {

// File cannot be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kModelSchema = 1;

// Shortest decimal text that parses back to the same double; empty for NaN.
std::string format_double(double v);

// "3,5,7,10" -> Thresholds.
Thresholds parse_thresholds(const std::string& list);

// Comma-separated numbers.
std::vector<double> parse_number_list(const std::string& list);

// Areas CSV with header area_id, N_pop, x_1..x_p, y_1..y_G. Rows whose count
// cells are all blank become out-of-sample areas. The number of y columns
// must equal thresholds.groups().
std::vector<AreaRecord> read_areas(std::istream& in, const Thresholds& thresholds);
std::vector<AreaRecord> load_areas(const std::string& path, const Thresholds& thresholds);

// Same layout without count columns.
std::vector<AreaRecord> load_domains(const std::string& path);

void write_areas(std::ostream& out, std::span<const AreaRecord> areas);
void write_areas(const std::string& path, std::span<const AreaRecord> areas);

// Unit-level CSV with header domain_id, value.
std::vector<sim::UnitValue> load_units(const std::string& path);
void write_units(const std::string& path, std::span<const sim::UnitValue> units);

// Model JSON. `created` adds a meta.created timestamp when non-empty.
std::string model_to_json(const FittedModel& model, const std::string& created = {});
FittedModel model_from_json(const std::string& text);
void save_model(const std::string& path, const FittedModel& model, const std::string& created = {});
FittedModel load_model(const std::string& path);

// Throws ValidationError when `data` thresholds differ from the model's.
void check_thresholds(const FittedModel& model, const Thresholds& data);

// Long format: one row per (iteration, block) with the flattened psi.
void write_trace(const std::string& path, const FittedModel& model);

// One row per (iteration, area) with ESS / S1.
void write_ess(const std::string& path, std::span<const std::string> area_ids,
               const std::vector<std::vector<double>>& ess_trace);

void write_estimates(const std::string& path, std::span<const AreaPrediction> rows);
void write_rmse(const std::string& path, std::span<const bootstrap::AreaRmse> rows);
void write_rrmse(const std::string& path, std::span<const sim::RrmseRow> rows);

}  // namespace gsae::io

#endif  // GSAE_IO_HPP
