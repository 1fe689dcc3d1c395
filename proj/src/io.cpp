#include "gsae/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace gsae::io {

namespace {

using Json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Splits one CSV record; double quotes protect commas and "" escapes a quote.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur.push_back('"');
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      cells.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ValidationError("unterminated quote");
  cells.push_back(was_quoted ? cur : trim(cur));
  return cells;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != last) {
    throw ValidationError("malformed number '" + s + "' in " + what);
  }
  return v;
}

long parse_long(const std::string& s, const std::string& what) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError("malformed integer '" + s + "' in " + what);
  }
  return v;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

// Reads non-empty records as cell vectors; the first is the header.
std::vector<std::vector<std::string>> read_records(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      rows.push_back(split_csv(line));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (rows.empty()) throw ValidationError("CSV has no header row");
  return rows;
}

struct AreaLayout {
  std::size_t id = 0;
  std::size_t pop = 0;
  std::vector<std::size_t> x;
  std::vector<std::size_t> y;
};

AreaLayout area_layout(const std::vector<std::string>& header, bool counts_allowed) {
  AreaLayout L;
  bool have_id = false;
  bool have_pop = false;
  for (std::size_t k = 0; k < header.size(); ++k) {
    const auto& h = header[k];
    if (h == "area_id" || h == "domain_id") {
      L.id = k;
      have_id = true;
    } else if (h == "N_pop") {
      L.pop = k;
      have_pop = true;
    } else if (h.rfind("x_", 0) == 0) {
      L.x.push_back(k);
    } else if (h.rfind("y_", 0) == 0 && counts_allowed) {
      L.y.push_back(k);
    } else {
      throw ValidationError("unexpected column '" + h + "'");
    }
  }
  if (!have_id || !have_pop) throw ValidationError("header needs area_id and N_pop columns");
  if (L.x.empty()) throw ValidationError("header declares no covariate columns x_*");
  return L;
}

std::vector<AreaRecord> parse_area_rows(std::istream& in, const Thresholds* thresholds) {
  const auto rows = read_records(in);
  const auto L = area_layout(rows.front(), thresholds != nullptr);
  if (thresholds && L.y.size() != static_cast<std::size_t>(thresholds->groups())) {
    throw ValidationError("threshold mismatch: file has " + std::to_string(L.y.size()) +
                          " count columns but the thresholds define G=" +
                          std::to_string(thresholds->groups()) + " classes");
  }
  std::vector<AreaRecord> areas;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    const std::string where = "row " + std::to_string(r + 1);
    if (cells.size() != rows.front().size()) {
      throw ValidationError(where + ": expected " + std::to_string(rows.front().size()) +
                            " cells, found " + std::to_string(cells.size()));
    }
    AreaRecord a;
    a.id = cells[L.id];
    if (a.id.empty()) throw ValidationError(where + ": empty area_id");
    a.pop_size = parse_long(cells[L.pop], where);
    a.x.resize(static_cast<Eigen::Index>(L.x.size()));
    for (std::size_t k = 0; k < L.x.size(); ++k) {
      a.x[static_cast<Eigen::Index>(k)] = parse_double(cells[L.x[k]], where);
    }
    std::size_t blanks = 0;
    for (auto k : L.y) blanks += cells[k].empty() ? 1 : 0;
    if (blanks != L.y.size() && blanks != 0) {
      throw ValidationError(where + ": count cells are partially blank");
    }
    if (!L.y.empty() && blanks == 0) {
      std::vector<int> counts;
      for (auto k : L.y) {
        const long c = parse_long(cells[k], where);
        if (c < 0) throw ValidationError(where + ": negative count");
        if (c > std::numeric_limits<int>::max()) throw ValidationError(where + ": count too large");
        counts.push_back(static_cast<int>(c));
      }
      a.sample = GroupedSample(std::move(counts));
    }
    areas.push_back(std::move(a));
  }
  if (thresholds) {
    validate_areas(areas, *thresholds);
  } else if (!areas.empty()) {
    for (const auto& a : areas) {
      if (!a.x.allFinite()) throw ValidationError("area " + a.id + ": non-finite covariate");
      if (a.pop_size < 1) throw ValidationError("area " + a.id + ": population size must be >= 1");
    }
  }
  return areas;
}

Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

double num(const Json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("model: missing field '") + key + "'");
  const auto& v = j.at(key);
  if (v.is_null()) return kNaN;
  if (!v.is_number()) throw ValidationError(std::string("model: field '") + key + "' is not a number");
  return v.get<double>();
}

Eigen::VectorXd vec(const Json& j, const char* key, std::size_t expected) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw ValidationError(std::string("model: field '") + key + "' must be an array");
  }
  const auto& a = j.at(key);
  if (a.size() != expected) {
    throw ValidationError(std::string("model: field '") + key + "' has the wrong length");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].is_number()) throw ValidationError(std::string("model: non-numeric entry in '") + key + "'");
    v[static_cast<Eigen::Index>(k)] = a[k].get<double>();
  }
  return v;
}

Json psi_json(const Hyperparameters& psi) {
  Json j;
  j["beta"] = vec_json(psi.beta);
  j["tau2"] = psi.tau2;
  j["lambda"] = psi.lambda;
  j["kappa"] = psi.kappa;
  j["gamma"] = vec_json(psi.gamma);
  return j;
}

Hyperparameters psi_from(const Json& j, std::size_t p) {
  Hyperparameters psi;
  psi.beta = vec(j, "beta", p);
  psi.tau2 = num(j, "tau2");
  psi.lambda = num(j, "lambda");
  psi.kappa = num(j, "kappa");
  psi.gamma = vec(j, "gamma", p);
  return psi;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<double> parse_number_list(const std::string& list) {
  std::vector<double> out;
  for (const auto& cell : split_csv(list)) out.push_back(parse_double(cell, "list '" + list + "'"));
  return out;
}

Thresholds parse_thresholds(const std::string& list) { return Thresholds(parse_number_list(list)); }

std::vector<AreaRecord> read_areas(std::istream& in, const Thresholds& thresholds) {
  return parse_area_rows(in, &thresholds);
}

std::vector<AreaRecord> load_areas(const std::string& path, const Thresholds& thresholds) {
  auto in = open_in(path);
  try {
    return read_areas(in, thresholds);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::vector<AreaRecord> load_domains(const std::string& path) {
  auto in = open_in(path);
  try {
    return parse_area_rows(in, nullptr);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_areas(std::ostream& out, std::span<const AreaRecord> areas) {
  if (areas.empty()) throw ValidationError("write_areas: no areas");
  const auto p = areas.front().x.size();
  int G = 0;
  for (const auto& a : areas) {
    if (a.sample) G = a.sample->groups();
  }
  out << "area_id,N_pop";
  for (Eigen::Index k = 0; k < p; ++k) out << ",x_" << k + 1;
  for (int g = 0; g < G; ++g) out << ",y_" << g + 1;
  out << '\n';
  for (const auto& a : areas) {
    out << quote_csv(a.id) << ',' << a.pop_size;
    for (Eigen::Index k = 0; k < p; ++k) out << ',' << format_double(a.x[k]);
    for (int g = 0; g < G; ++g) {
      out << ',';
      if (a.sample) out << a.sample->count(g);
    }
    out << '\n';
  }
}

void write_areas(const std::string& path, std::span<const AreaRecord> areas) {
  auto out = open_out(path);
  write_areas(out, areas);
  finish(out, path);
}

std::vector<sim::UnitValue> load_units(const std::string& path) {
  auto in = open_in(path);
  const auto rows = read_records(in);
  const auto& header = rows.front();
  if (header.size() != 2 || header[0] != "domain_id" || header[1] != "value") {
    throw ValidationError(path + ": unit file header must be domain_id,value");
  }
  std::vector<sim::UnitValue> units;
  units.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) throw ValidationError(path + ": row " + std::to_string(r + 1) + ": expected 2 cells");
    units.push_back({rows[r][0], parse_double(rows[r][1], path + " row " + std::to_string(r + 1))});
  }
  return units;
}

void write_units(const std::string& path, std::span<const sim::UnitValue> units) {
  auto out = open_out(path);
  out << "domain_id,value\n";
  for (const auto& u : units) out << quote_csv(u.domain_id) << ',' << format_double(u.value) << '\n';
  finish(out, path);
}

std::string model_to_json(const FittedModel& model, const std::string& created) {
  Json j;
  j["schema"] = kModelSchema;
  j["G"] = model.thresholds.groups();
  Json cuts = Json::array();
  for (double c : model.thresholds.cuts()) cuts.push_back(c);
  j["thresholds"] = cuts;
  j["p"] = model.psi.p();
  j["beta"] = vec_json(model.psi.beta);
  j["tau2"] = model.psi.tau2;
  j["lambda"] = model.psi.lambda;
  j["kappa"] = model.psi.kappa;
  j["gamma"] = vec_json(model.psi.gamma);
  j["shift"] = model.options.shift;
  j["renormalize_groups"] = model.options.renormalize_groups;
  j["converged"] = model.converged;
  j["iterations"] = model.iterations;
  if (model.scaling.empty()) {
    j["scaling"] = nullptr;
  } else {
    j["scaling"] = {{"center", model.scaling.center}, {"scale", model.scaling.scale}};
  }
  Json trace = Json::array();
  for (const auto& t : model.trace) {
    Json e;
    e["iter"] = t.iter;
    e["psi"] = psi_json(t.psi);
    Json ek;
    for (std::size_t b = 0; b < kBlockNames.size(); ++b) {
      if (std::isnan(t.e_k[b])) {
        ek[kBlockNames[b]] = nullptr;
      } else {
        ek[kBlockNames[b]] = t.e_k[b];
      }
    }
    e["e_k"] = ek;
    e["ess_q10"] = t.ess_q10;
    e["ess_q50"] = t.ess_q50;
    e["ess_q90"] = t.ess_q90;
    trace.push_back(e);
  }
  j["em_trace"] = trace;
  if (!created.empty()) j["meta"] = {{"created", created}};
  return j.dump(2) + "\n";
}

FittedModel model_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("model: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("model: top level must be an object");
  if (!j.contains("schema") || !j["schema"].is_number_integer() || j["schema"].get<int>() != kModelSchema) {
    throw ValidationError("model: unsupported schema version (expected " + std::to_string(kModelSchema) + ")");
  }
  FittedModel m;
  try {
    const auto& cuts = j.at("thresholds");
    std::vector<double> c;
    for (const auto& v : cuts) c.push_back(v.get<double>());
    m.thresholds = Thresholds(std::move(c));
    if (j.at("G").get<int>() != m.thresholds.groups()) {
      throw ValidationError("model: G does not match the thresholds");
    }
    const auto p = j.at("p").get<std::size_t>();
    m.psi = psi_from(j, p);
    m.options.shift = j.value("shift", 0.0);
    m.options.renormalize_groups = j.value("renormalize_groups", false);
    m.converged = j.value("converged", false);
    m.iterations = j.value("iterations", 0);
    if (j.contains("scaling") && !j["scaling"].is_null()) {
      m.scaling.center = j["scaling"].at("center").get<std::vector<double>>();
      m.scaling.scale = j["scaling"].at("scale").get<std::vector<double>>();
      if (m.scaling.center.size() != p || m.scaling.scale.size() != p) {
        throw ValidationError("model: scaling has the wrong length");
      }
    }
    if (j.contains("em_trace")) {
      for (const auto& e : j.at("em_trace")) {
        EmTraceEntry t;
        t.iter = e.at("iter").get<int>();
        t.psi = psi_from(e.at("psi"), p);
        for (std::size_t b = 0; b < kBlockNames.size(); ++b) t.e_k[b] = num(e.at("e_k"), kBlockNames[b]);
        t.ess_q10 = num(e, "ess_q10");
        t.ess_q50 = num(e, "ess_q50");
        t.ess_q90 = num(e, "ess_q90");
        m.trace.push_back(std::move(t));
      }
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }
  validate(m.psi);
  return m;
}

void save_model(const std::string& path, const FittedModel& model, const std::string& created) {
  validate(model.psi);
  auto out = open_out(path);
  out << model_to_json(model, created);
  finish(out, path);
}

FittedModel load_model(const std::string& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return model_from_json(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void check_thresholds(const FittedModel& model, const Thresholds& data) {
  if (!(model.thresholds == data)) {
    throw ValidationError("threshold mismatch: model has G=" + std::to_string(model.thresholds.groups()) +
                          ", data uses G=" + std::to_string(data.groups()) +
                          " or different cut values");
  }
}

void write_trace(const std::string& path, const FittedModel& model) {
  auto out = open_out(path);
  const auto p = model.psi.p();
  out << "iter,block,e_k,ess_q10,ess_q50,ess_q90";
  for (int k = 0; k < p; ++k) out << ",beta_" << k + 1;
  out << ",tau2,lambda,kappa";
  for (int k = 0; k < p; ++k) out << ",gamma_" << k + 1;
  out << '\n';
  for (const auto& t : model.trace) {
    for (std::size_t b = 0; b < kBlockNames.size(); ++b) {
      out << t.iter << ',' << kBlockNames[b] << ',' << format_double(t.e_k[b]) << ','
          << format_double(t.ess_q10) << ',' << format_double(t.ess_q50) << ','
          << format_double(t.ess_q90);
      for (int k = 0; k < p; ++k) out << ',' << format_double(t.psi.beta[k]);
      out << ',' << format_double(t.psi.tau2) << ',' << format_double(t.psi.lambda) << ','
          << format_double(t.psi.kappa);
      for (int k = 0; k < p; ++k) out << ',' << format_double(t.psi.gamma[k]);
      out << '\n';
    }
  }
  finish(out, path);
}

void write_ess(const std::string& path, std::span<const std::string> area_ids,
               const std::vector<std::vector<double>>& ess_trace) {
  auto out = open_out(path);
  out << "iter,area_id,ess_ratio\n";
  for (std::size_t k = 0; k < ess_trace.size(); ++k) {
    for (std::size_t i = 0; i < ess_trace[k].size() && i < area_ids.size(); ++i) {
      out << k + 1 << ',' << quote_csv(area_ids[i]) << ',' << format_double(ess_trace[k][i]) << '\n';
    }
  }
  finish(out, path);
}

void write_estimates(const std::string& path, std::span<const AreaPrediction> rows) {
  auto out = open_out(path);
  out << "area_id,in_sample,mean_eb,gini_eb,mean_naive,draws_used,clamped_draws\n";
  for (const auto& r : rows) {
    out << quote_csv(r.eb.area_id) << ',' << (r.in_sample ? 1 : 0) << ','
        << format_double(r.eb.mean_eb) << ',' << format_double(r.eb.gini_eb) << ','
        << format_double(r.mean_naive) << ',' << r.eb.draws_used << ',' << r.eb.clamped_draws
        << '\n';
  }
  finish(out, path);
}

void write_rmse(const std::string& path, std::span<const bootstrap::AreaRmse> rows) {
  auto out = open_out(path);
  out << "area_id,n,rmse_eb,rmse_naive,B,rmse_gini_eb,se_eb,se_naive\n";
  for (const auto& r : rows) {
    out << quote_csv(r.area_id) << ',' << r.n << ',' << format_double(r.rmse_eb) << ','
        << format_double(r.rmse_naive) << ',' << r.B << ',' << format_double(r.rmse_gini_eb) << ','
        << format_double(r.se_eb) << ',' << format_double(r.se_naive) << '\n';
  }
  finish(out, path);
}

void write_rrmse(const std::string& path, std::span<const sim::RrmseRow> rows) {
  auto out = open_out(path);
  out << "area_index,n,rrmse_eb,rrmse_naive,G,R\n";
  for (const auto& r : rows) {
    out << r.area_index << ',' << r.n << ',' << format_double(r.rrmse_eb) << ','
        << format_double(r.rrmse_naive) << ',' << r.G << ',' << r.R << '\n';
  }
  finish(out, path);
}

}  // namespace gsae::io
