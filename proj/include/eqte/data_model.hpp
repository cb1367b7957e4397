#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace eqte {

// One unit: outcome, binary treatment, covariate vector.
struct ObservedRecord {
  double outcome = 0.0;
  int treatment = 0;
  std::vector<double> covariates;
};

// The full sample. Immutable after construction; the constructor enforces
// finite values, 0/1 treatment and a common covariate dimension.
class Dataset {
 public:
  Dataset(std::vector<ObservedRecord> records,
          std::vector<std::string> covariate_names);

  std::size_t size() const noexcept { return records_.size(); }
  std::size_t covariate_dim() const noexcept { return covariate_names_.size(); }
  std::size_t treated_count() const noexcept { return treated_; }
  std::size_t control_count() const noexcept { return size() - treated_; }

  const std::vector<ObservedRecord>& records() const noexcept { return records_; }
  const ObservedRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<std::string>& covariate_names() const noexcept {
    return covariate_names_;
  }

  std::vector<double> outcomes() const;

  // Keeps only the named covariates, in the order given.
  Dataset select_covariates(const std::vector<std::string>& names) const;

  // Rows picked by index (with repetition); used by the bootstrap.
  Dataset resample(std::span<const std::size_t> rows) const;

  // Same rows with outcome mapped to scale * y + shift.
  Dataset affine_outcome(double scale, double shift) const;

  // Throws EstimandUndefined unless both arms are nonempty.
  void require_both_arms(const std::string& context) const;

 private:
  std::vector<ObservedRecord> records_;
  std::vector<std::string> covariate_names_;
  std::size_t treated_ = 0;
};

// Reads a comma-separated file with a header row. Covariates keep the order
// of covariate_cols. Errors: schema (missing column), parse (bad cell or
// treatment outside {0,1}, with the row number), empty-input (no data rows).
Dataset ingest_csv(std::istream& source, const std::string& outcome_col,
                   const std::string& treatment_col,
                   const std::vector<std::string>& covariate_cols);

// Writes outcome, treatment and covariates using shortest round-trip decimal
// formatting, so ingest_csv(write_csv(d)) reproduces d bit-for-bit.
void write_csv(const Dataset& data, std::ostream& out,
               const std::string& outcome_col = "y",
               const std::string& treatment_col = "d");

// Regression design: rows w_i (row-major, n x p) and response y.
struct Design {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> rows;
  std::vector<double> response;
  std::vector<std::string> column_names;

  const double* row(std::size_t i) const { return rows.data() + i * p; }

  // Columns (1, D, X_1 .. X_{m-1}).
  static Design treatment_model(const Dataset& data);
  // Columns (1, X_1 .. X_{m-1}); response is the treatment indicator.
  static Design propensity_model(const Dataset& data);
  static Design intercept_only(std::span<const double> y);
};

// Throws SingularDesign when the design does not have full column rank.
void require_full_rank(const Design& design);

// Probability levels tau_1 < ... < tau_J in (0, 1) with interval weights.
// The first transition_index levels form the bulk segment; the transition
// level is levels[transition_index - 1].
struct ProbabilityGrid {
  std::vector<double> levels;
  std::vector<double> weights;
  std::size_t transition_index = 0;

  std::size_t size() const noexcept { return levels.size(); }
  double transition_level() const { return levels[transition_index - 1]; }
  double max_level() const { return levels.back(); }
  std::span<const double> bulk_levels() const {
    return {levels.data(), transition_index};
  }
  std::span<const double> extreme_levels() const {
    return {levels.data() + transition_index, levels.size() - transition_index};
  }
};

// Bulk levels j * tau_u / bulk_count, extreme levels
// tau_u + j * (tau_max - tau_u) / extreme_count. Weights are the level
// increments except the last, which absorbs the remaining mass 1 - tau_{J-1}.
ProbabilityGrid build_grid(double tau_u, int bulk_count, int extreme_count,
                           double tau_max);

}  // namespace eqte
