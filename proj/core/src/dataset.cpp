#include "hdsim/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hdsim {

void Dataset::validate(bool require_subject_observations) const {
  const int n = num_subjects();
  if (n == 0) throw std::invalid_argument("dataset: no subjects");
  for (int i = 0; i < X.rows(); ++i)
    if (std::abs(X.row(i).norm() - 1.0) > 1e-8)
      throw std::invalid_argument("dataset: X row " + std::to_string(i) +
                                  " is not unit-norm");
  for (int i = 0; i < Z.rows(); ++i)
    if (std::abs(Z.row(i).norm() - 1.0) > 1e-8)
      throw std::invalid_argument("dataset: Z row " + std::to_string(i) +
                                  " is not unit-norm");
  if (X.rows() > 0 && Z.rows() > 0 && X.rows() != Z.rows())
    throw std::invalid_argument("dataset: X and Z subject counts differ");
  std::vector<char> seen(n, 0);
  for (const auto& o : obs) {
    if (o.subject < 0 || o.subject >= n)
      throw std::invalid_argument("dataset: observation subject out of range");
    if (o.region < 0 || o.region >= num_regions)
      throw std::invalid_argument("dataset: observation region out of range");
    if (!(o.t >= 0.0 && o.t <= 1.0))
      throw std::invalid_argument("dataset: scaled time outside [0,1]");
    seen[o.subject] = 1;
  }
  if (require_subject_observations)
    for (int i = 0; i < n; ++i)
      if (!seen[i])
        throw std::invalid_argument("dataset: subject " + std::to_string(i) +
                                    " has no observations");
}

void normalize_rows(Eigen::MatrixXd& m) {
  for (int i = 0; i < m.rows(); ++i) {
    const double nrm = m.row(i).norm();
    if (nrm > 0.0) m.row(i) /= nrm;
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& path, int row,
                    int col) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw std::runtime_error(path + ": cannot parse value at row " +
                             std::to_string(row) + ", column " +
                             std::to_string(col) + ": '" + s + "'");
  return v;
}

}  // namespace

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty file");
  const auto header = split_line(line, ',');
  const int cols = static_cast<int>(header.size());
  std::vector<double> values;
  int rows = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_line(line, ',');
    if (static_cast<int>(fields.size()) != cols)
      throw std::runtime_error(path + ": row " + std::to_string(lineno) +
                               " has " + std::to_string(fields.size()) +
                               " fields, expected " + std::to_string(cols));
    for (int c = 0; c < cols; ++c)
      values.push_back(parse_double(fields[c], path, lineno, c + 1));
    ++rows;
  }
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = values[r * cols + c];
  return m;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::string& col_prefix) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (int c = 0; c < m.cols(); ++c)
    out << (c ? "," : "") << col_prefix << (c + 1);
  out << '\n';
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<Observation> read_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty file");
  const auto header = split_line(line, ',');
  if (header.size() != 5 || header[0] != "subject_id")
    throw std::runtime_error(
        path +
        ": expected header subject_id,region_id,time_raw,time_scaled,value");
  std::vector<Observation> obs;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_line(line, ',');
    if (f.size() != 5)
      throw std::runtime_error(path + ": row " + std::to_string(lineno) +
                               " needs 5 fields");
    Observation o;
    o.subject = static_cast<int>(parse_double(f[0], path, lineno, 1));
    o.region = static_cast<int>(parse_double(f[1], path, lineno, 2));
    o.time_raw = parse_double(f[2], path, lineno, 3);
    o.t = parse_double(f[3], path, lineno, 4);
    o.y = parse_double(f[4], path, lineno, 5);
    obs.push_back(o);
  }
  return obs;
}

void write_observations(const std::string& path,
                        const std::vector<Observation>& obs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "subject_id,region_id,time_raw,time_scaled,value\n";
  for (const auto& o : obs)
    out << o.subject << ',' << o.region << ',' << o.time_raw << ',' << o.t
        << ',' << o.y << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace hdsim
