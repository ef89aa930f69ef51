#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace hdsim {

struct Observation {
  int subject = 0;       // 0-based
  int region = 0;        // 0-based
  double time_raw = 0.0;
  double t = 0.0;        // scaled time in [0,1]
  double y = 0.0;        // response (log-volume scale)
};

// Long-format longitudinal data with row-normalized covariate matrices.
// X is the high-dimensional block (may be empty for the no-SNP variant),
// Z the low-dimensional one.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Z;
  std::vector<Observation> obs;
  int num_regions = 0;

  int num_subjects() const {
    return static_cast<int>(Z.rows() > 0 ? Z.rows() : X.rows());
  }
  int xdim() const { return static_cast<int>(X.cols()); }
  int zdim() const { return static_cast<int>(Z.cols()); }

  // Throws std::invalid_argument on broken invariants: non-unit rows,
  // scaled times outside [0,1], out-of-range indices, subjects with no
  // observations. Split halves may legitimately leave a subject without
  // observations, hence the flag.
  void validate(bool require_subject_observations = true) const;
};

void normalize_rows(Eigen::MatrixXd& m);

// Headered delimited text, one subject per row.
Eigen::MatrixXd read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::string& col_prefix);

// Observation table with columns subject_id, region_id, time_raw,
// time_scaled, value.
std::vector<Observation> read_observations(const std::string& path);
void write_observations(const std::string& path,
                        const std::vector<Observation>& obs);

}  // namespace hdsim
