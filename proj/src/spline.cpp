#include "scarbasis/spline.hpp"

#include <algorithm>
#include <cstddef>

#include "scarbasis/errors.hpp"

namespace scarbasis {

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  build(Bc::natural, 0.0, 0.0);
}

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y,
                         double slope_left, double slope_right)
    : x_(std::move(x)), y_(std::move(y)) {
  build(Bc::clamped, slope_left, slope_right);
}

void CubicSpline::build(Bc bc, double slope_left, double slope_right) {
  const std::size_t n = x_.size();
  if (n < 3) throw ConfigError("spline needs at least 3 nodes");
  if (y_.size() != n) throw ConfigError("spline x/y size mismatch");
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!(x_[i] < x_[i + 1])) throw ConfigError("spline nodes must increase strictly");

  // Solve the standard tridiagonal system for node second derivatives m_i.
  std::vector<double> h(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) h[i] = x_[i + 1] - x_[i];

  std::vector<double> diag(n), off_lo(n), off_hi(n), rhs(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    off_lo[i] = h[i - 1];
    diag[i] = 2.0 * (h[i - 1] + h[i]);
    off_hi[i] = h[i];
    rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h[i] - (y_[i] - y_[i - 1]) / h[i - 1]);
  }
  if (bc == Bc::natural) {
    diag[0] = 1.0; off_hi[0] = 0.0; rhs[0] = 0.0;
    diag[n - 1] = 1.0; off_lo[n - 1] = 0.0; rhs[n - 1] = 0.0;
  } else {
    diag[0] = 2.0 * h[0]; off_hi[0] = h[0];
    rhs[0] = 6.0 * ((y_[1] - y_[0]) / h[0] - slope_left);
    diag[n - 1] = 2.0 * h[n - 2]; off_lo[n - 1] = h[n - 2];
    rhs[n - 1] = 6.0 * (slope_right - (y_[n - 1] - y_[n - 2]) / h[n - 2]);
  }

  // Thomas algorithm.
  std::vector<double> m(n);
  for (std::size_t i = 1; i < n; ++i) {
    const double w = off_lo[i] / diag[i - 1];
    diag[i] -= w * off_hi[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  m[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;)
    m[i] = (rhs[i] - off_hi[i] * m[i + 1]) / diag[i];

  b_.resize(n - 1);
  c_.resize(n - 1);
  d_.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    b_[i] = (y_[i + 1] - y_[i]) / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0;
    c_[i] = m[i] / 2.0;
    d_[i] = (m[i + 1] - m[i]) / (6.0 * h[i]);
  }
}

std::size_t CubicSpline::interval(double x) const {
  if (x <= x_.front()) return 0;
  if (x >= x_.back()) return x_.size() - 2;
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  return static_cast<std::size_t>(it - x_.begin()) - 1;
}

double CubicSpline::operator()(double x) const {
  const std::size_t i = interval(x);
  const double t = x - x_[i];
  return y_[i] + t * (b_[i] + t * (c_[i] + t * d_[i]));
}

double CubicSpline::deriv(double x) const {
  const std::size_t i = interval(x);
  const double t = x - x_[i];
  return b_[i] + t * (2.0 * c_[i] + t * 3.0 * d_[i]);
}

double CubicSpline::deriv2(double x) const {
  const std::size_t i = interval(x);
  const double t = x - x_[i];
  return 2.0 * c_[i] + 6.0 * d_[i] * t;
}

} // namespace scarbasis
