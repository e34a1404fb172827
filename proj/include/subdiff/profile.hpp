#pragma once

// A scalar function of time held as samples on a TimeGrid, evaluated between
// nodes by linear interpolation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "subdiff/error.hpp"
#include "subdiff/grid.hpp"

namespace subdiff {

class Profile {
public:
  Profile() = default;
  Profile(TimeGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      std::ostringstream os;
      os << "Profile: " << values_.size() << " samples for a grid of " << grid_.size()
         << " nodes";
      throw GridMismatchError(os.str());
    }
    for (double v : values_)
      if (!std::isfinite(v)) throw DomainError("Profile: non-finite sample");
  }

  static Profile constant(const TimeGrid& grid, double c) {
    return {grid, std::vector<double>(grid.size(), c)};
  }

  static Profile sample(const TimeGrid& grid, const std::function<double(double)>& f) {
    std::vector<double> v(grid.size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = f(grid.node(j));
    return {grid, std::move(v)};
  }

  const TimeGrid& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t j) const noexcept { return values_[j]; }

  double at(double t) const {
    if (!(t >= 0.0 && t <= grid_.t_final())) {
      std::ostringstream os;
      os << "Profile::at: t=" << t << " outside [0, " << grid_.t_final() << "]";
      throw DomainError(os.str());
    }
    const double s = t / grid_.step();
    const auto j = std::min(static_cast<std::size_t>(s), grid_.n_steps() - 1);
    const double frac = s - static_cast<double>(j);
    return values_[j] + frac * (values_[j + 1] - values_[j]);
  }

  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }

private:
  TimeGrid grid_;
  std::vector<double> values_ = std::vector<double>(2, 0.0);
};

inline void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* who) {
  if (!(a == b)) {
    std::ostringstream os;
    os << who << ": time grids differ (T=" << a.t_final() << ", N=" << a.n_steps()
       << " vs T=" << b.t_final() << ", N=" << b.n_steps() << ")";
    throw GridMismatchError(os.str());
  }
}

} // namespace subdiff
