#pragma once

#include <vector>

namespace scarbasis {

// Cubic interpolating spline on strictly increasing nodes.
// Outside [x_front, x_back] the end interval's cubic is extrapolated.
class CubicSpline {
public:
  enum class Bc { natural, clamped };

  CubicSpline() = default;

  // Natural boundary (zero second derivative at both ends).
  CubicSpline(std::vector<double> x, std::vector<double> y);

  // Clamped boundary with prescribed end slopes.
  CubicSpline(std::vector<double> x, std::vector<double> y,
              double slope_left, double slope_right);

  double operator()(double x) const;
  double deriv(double x) const;
  double deriv2(double x) const;

  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }
  std::size_t size() const { return x_.size(); }
  bool empty() const { return x_.empty(); }

private:
  void build(Bc bc, double slope_left, double slope_right);
  std::size_t interval(double x) const;

  std::vector<double> x_, y_;
  std::vector<double> b_, c_, d_; // y + b*t + c*t^2 + d*t^3, t = x - x_i
};

} // namespace scarbasis
