#include "eqte/data_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string_view>
#include <unordered_map>

#include "eqte/error.hpp"

namespace eqte {

Dataset::Dataset(std::vector<ObservedRecord> records,
                 std::vector<std::string> covariate_names)
    : records_(std::move(records)), covariate_names_(std::move(covariate_names)) {
  if (records_.empty()) fail(ErrorKind::kEmptyInput, "dataset has no records");
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!std::isfinite(r.outcome))
      fail(ErrorKind::kParse, "record " + std::to_string(i + 1) + ": outcome is not finite");
    if (r.treatment != 0 && r.treatment != 1)
      fail(ErrorKind::kParse, "record " + std::to_string(i + 1) + ": treatment must be 0 or 1");
    if (r.covariates.size() != covariate_names_.size())
      fail(ErrorKind::kDimensionMismatch,
           "record " + std::to_string(i + 1) + " has " +
               std::to_string(r.covariates.size()) + " covariates, expected " +
               std::to_string(covariate_names_.size()));
    for (double x : r.covariates)
      if (!std::isfinite(x))
        fail(ErrorKind::kParse, "record " + std::to_string(i + 1) + ": covariate is not finite");
    treated_ += static_cast<std::size_t>(r.treatment);
  }
}

std::vector<double> Dataset::outcomes() const {
  std::vector<double> y(records_.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = records_[i].outcome;
  return y;
}

Dataset Dataset::select_covariates(const std::vector<std::string>& names) const {
  std::vector<std::size_t> idx;
  idx.reserve(names.size());
  for (const auto& name : names) {
    auto it = std::find(covariate_names_.begin(), covariate_names_.end(), name);
    if (it == covariate_names_.end())
      fail(ErrorKind::kSchema, "unknown covariate '" + name + "'");
    idx.push_back(static_cast<std::size_t>(it - covariate_names_.begin()));
  }
  std::vector<ObservedRecord> out;
  out.reserve(records_.size());
  for (const auto& r : records_) {
    ObservedRecord s{r.outcome, r.treatment, {}};
    s.covariates.reserve(idx.size());
    for (std::size_t k : idx) s.covariates.push_back(r.covariates[k]);
    out.push_back(std::move(s));
  }
  return Dataset(std::move(out), names);
}

Dataset Dataset::resample(std::span<const std::size_t> rows) const {
  std::vector<ObservedRecord> out;
  out.reserve(rows.size());
  for (std::size_t i : rows) out.push_back(records_.at(i));
  return Dataset(std::move(out), covariate_names_);
}

Dataset Dataset::affine_outcome(double scale, double shift) const {
  std::vector<ObservedRecord> out = records_;
  for (auto& r : out) r.outcome = scale * r.outcome + shift;
  return Dataset(std::move(out), covariate_names_);
}

void Dataset::require_both_arms(const std::string& context) const {
  if (treated_ == 0)
    fail(ErrorKind::kEstimandUndefined, context + ": no treated units");
  if (treated_ == records_.size())
    fail(ErrorKind::kEstimandUndefined, context + ": no control units");
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

// Splits one line; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.emplace_back(trim(cur));
  return fields;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Dataset ingest_csv(std::istream& source, const std::string& outcome_col,
                   const std::string& treatment_col,
                   const std::vector<std::string>& covariate_cols) {
  std::string line;
  if (!std::getline(source, line))
    fail(ErrorKind::kEmptyInput, "input has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_fields(line);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t k = 0; k < header.size(); ++k) column.emplace(header[k], k);
  auto locate = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) fail(ErrorKind::kSchema, "missing column '" + name + "'");
    return it->second;
  };
  const std::size_t y_col = locate(outcome_col);
  const std::size_t d_col = locate(treatment_col);
  std::vector<std::size_t> x_cols;
  for (const auto& name : covariate_cols) x_cols.push_back(locate(name));

  std::vector<ObservedRecord> records;
  std::size_t row = 0;
  while (std::getline(source, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    auto cell = [&](std::size_t col, const std::string& name) {
      if (col >= fields.size())
        fail(ErrorKind::kParse, "row " + std::to_string(row) + ": missing value for '" + name + "'");
      double v = 0.0;
      if (!parse_double(fields[col], v))
        fail(ErrorKind::kParse, "row " + std::to_string(row) + ": non-numeric value '" +
                                    fields[col] + "' in column '" + name + "'");
      return v;
    };
    ObservedRecord rec;
    rec.outcome = cell(y_col, outcome_col);
    const double d = cell(d_col, treatment_col);
    if (d != 0.0 && d != 1.0)
      fail(ErrorKind::kParse, "row " + std::to_string(row) + ": treatment value '" +
                                  fields[d_col] + "' is not 0 or 1");
    rec.treatment = d == 1.0 ? 1 : 0;
    rec.covariates.reserve(x_cols.size());
    for (std::size_t k = 0; k < x_cols.size(); ++k)
      rec.covariates.push_back(cell(x_cols[k], covariate_cols[k]));
    records.push_back(std::move(rec));
  }
  if (records.empty()) fail(ErrorKind::kEmptyInput, "input has no data rows");
  return Dataset(std::move(records), covariate_cols);
}

void write_csv(const Dataset& data, std::ostream& out, const std::string& outcome_col,
               const std::string& treatment_col) {
  out << outcome_col << ',' << treatment_col;
  for (const auto& name : data.covariate_names()) out << ',' << name;
  out << '\n';
  for (const auto& r : data.records()) {
    out << format_double(r.outcome) << ',' << r.treatment;
    for (double x : r.covariates) out << ',' << format_double(x);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Designs

Design Design::treatment_model(const Dataset& data) {
  Design d;
  d.n = data.size();
  d.p = data.covariate_dim() + 2;
  d.rows.reserve(d.n * d.p);
  d.response.reserve(d.n);
  d.column_names = {"(intercept)", "treatment"};
  for (const auto& name : data.covariate_names()) d.column_names.push_back(name);
  for (const auto& r : data.records()) {
    d.rows.push_back(1.0);
    d.rows.push_back(static_cast<double>(r.treatment));
    d.rows.insert(d.rows.end(), r.covariates.begin(), r.covariates.end());
    d.response.push_back(r.outcome);
  }
  return d;
}

Design Design::propensity_model(const Dataset& data) {
  Design d;
  d.n = data.size();
  d.p = data.covariate_dim() + 1;
  d.rows.reserve(d.n * d.p);
  d.column_names = {"(intercept)"};
  for (const auto& name : data.covariate_names()) d.column_names.push_back(name);
  for (const auto& r : data.records()) {
    d.rows.push_back(1.0);
    d.rows.insert(d.rows.end(), r.covariates.begin(), r.covariates.end());
    d.response.push_back(static_cast<double>(r.treatment));
  }
  return d;
}

Design Design::intercept_only(std::span<const double> y) {
  Design d;
  d.n = y.size();
  d.p = 1;
  d.rows.assign(d.n, 1.0);
  d.response.assign(y.begin(), y.end());
  d.column_names = {"(intercept)"};
  return d;
}

void require_full_rank(const Design& design) {
  if (design.n < design.p)
    fail(ErrorKind::kSingularDesign,
         "design has fewer rows (" + std::to_string(design.n) + ") than columns (" +
             std::to_string(design.p) + ")");
  Eigen::MatrixXd w(design.n, design.p);
  for (std::size_t i = 0; i < design.n; ++i)
    for (std::size_t j = 0; j < design.p; ++j) w(i, j) = design.rows[i * design.p + j];
  // Column scaling makes the rank threshold independent of units.
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    const double norm = w.col(j).norm();
    if (norm == 0.0)
      fail(ErrorKind::kSingularDesign,
           "design column '" + design.column_names[j] + "' is identically zero");
    w.col(j) /= norm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(w);
  qr.setThreshold(1e-10);
  if (qr.rank() < w.cols())
    fail(ErrorKind::kSingularDesign,
         "design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
             std::to_string(w.cols()) + ")");
}

// ---------------------------------------------------------------------------
// Grid

ProbabilityGrid build_grid(double tau_u, int bulk_count, int extreme_count,
                           double tau_max) {
  if (!(tau_u > 0.0 && tau_u < tau_max && tau_max < 1.0))
    fail(ErrorKind::kInvalidGrid, "grid requires 0 < tau_u < tau_max < 1 (tau_u=" +
                                      format_double(tau_u) + ", tau_max=" +
                                      format_double(tau_max) + ")");
  if (bulk_count < 1 || extreme_count < 1)
    fail(ErrorKind::kInvalidGrid, "grid segment counts must be at least 1");

  ProbabilityGrid g;
  g.transition_index = static_cast<std::size_t>(bulk_count);
  g.levels.reserve(static_cast<std::size_t>(bulk_count + extreme_count));
  for (int j = 1; j <= bulk_count; ++j)
    g.levels.push_back(j == bulk_count ? tau_u : j * tau_u / bulk_count);
  const double step = (tau_max - tau_u) / extreme_count;
  for (int j = 1; j <= extreme_count; ++j)
    g.levels.push_back(j == extreme_count ? tau_max : tau_u + j * step);

  g.weights.resize(g.levels.size());
  double prev = 0.0;
  for (std::size_t j = 0; j + 1 < g.levels.size(); ++j) {
    g.weights[j] = g.levels[j] - prev;
    prev = g.levels[j];
  }
  g.weights.back() = 1.0 - prev;
  return g;
}

}  // namespace eqte
