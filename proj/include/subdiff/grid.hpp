#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "subdiff/error.hpp"

namespace subdiff {

/// Uniform nodes t_j = j T / N, j = 0..N.
class TimeGrid {
public:
  TimeGrid() = default;
  TimeGrid(double t_final, std::size_t n_steps) : t_final_(t_final), n_steps_(n_steps) {
    if (!(std::isfinite(t_final) && t_final > 0.0) || n_steps == 0) {
      std::ostringstream os;
      os << "TimeGrid: need T > 0 and N >= 1 (T=" << t_final << ", N=" << n_steps << ")";
      throw DomainError(os.str());
    }
  }

  double t_final() const noexcept { return t_final_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  std::size_t size() const noexcept { return n_steps_ + 1; }
  double step() const noexcept { return t_final_ / static_cast<double>(n_steps_); }
  double node(std::size_t j) const noexcept {
    if (j == n_steps_) return t_final_;
    return static_cast<double>(j) * t_final_ / static_cast<double>(n_steps_);
  }
  std::vector<double> nodes() const {
    std::vector<double> t(size());
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = node(j);
    return t;
  }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) noexcept {
    return a.t_final_ == b.t_final_ && a.n_steps_ == b.n_steps_;
  }

private:
  double t_final_ = 1.0;
  std::size_t n_steps_ = 1;
};

/// Uniform nodes x_i = i l / M with M even, so composite Simpson applies.
class SpaceGrid {
public:
  SpaceGrid() = default;
  SpaceGrid(double length, std::size_t n_cells) : length_(length), n_cells_(n_cells) {
    if (!(std::isfinite(length) && length > 0.0) || n_cells < 2 || n_cells % 2 != 0) {
      std::ostringstream os;
      os << "SpaceGrid: need l > 0 and even M >= 2 (l=" << length << ", M=" << n_cells << ")";
      throw DomainError(os.str());
    }
  }

  double length() const noexcept { return length_; }
  std::size_t n_cells() const noexcept { return n_cells_; }
  std::size_t size() const noexcept { return n_cells_ + 1; }
  double step() const noexcept { return length_ / static_cast<double>(n_cells_); }
  double node(std::size_t i) const noexcept {
    if (i == n_cells_) return length_;
    return static_cast<double>(i) * length_ / static_cast<double>(n_cells_);
  }
  std::vector<double> nodes() const {
    std::vector<double> x(size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = node(i);
    return x;
  }

  friend bool operator==(const SpaceGrid& a, const SpaceGrid& b) noexcept {
    return a.length_ == b.length_ && a.n_cells_ == b.n_cells_;
  }

private:
  double length_ = 1.0;
  std::size_t n_cells_ = 2;
};

/// Dense row-major matrix; fields use rows = time nodes, columns = space nodes.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  double* row(std::size_t r) noexcept { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const noexcept { return data_.data() + r * cols_; }
  std::vector<double> row_vector(std::size_t r) const {
    return {row(r), row(r) + cols_};
  }
  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }
  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double max_abs_difference(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw GridMismatchError("max_abs_difference: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

} // namespace subdiff
