#include "vortexlab/metric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vortexlab/error.hpp"

namespace vortexlab {

double smoothstep5(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

double smoothstep5_derivative(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  return 30.0 * s * s * (1.0 - s) * (1.0 - s);
}

WarpedMetric::WarpedMetric(double a1, double a2, double r0, const Vec2& center, const Vec2& period)
    : a1_(a1), a2_(a2), r0_(r0), center_(center), period_(period) {
  if (!(r0 > 0.0)) fail(ErrorCode::Validation, "warped metric needs r0 > 0");
}

double WarpedMetric::exponent(const Vec2& y) const {
  const double r = y.norm();
  const double chi = 1.0 - smoothstep5((r - 0.5 * r0_) / (0.5 * r0_));
  if (chi == 0.0) return 0.0;
  return (a1_ * y[0] * y[0] - a2_ * y[1] * y[1]) * chi;
}

Mat3 WarpedMetric::operator()(const Vec3& x) const {
  Vec2 y(x[1] - center_[0], x[2] - center_[1]);
  for (int a = 0; a < 2; ++a) y[a] -= period_[a] * std::round(y[a] / period_[a]);
  Mat3 g = Mat3::Identity();
  g(0, 0) = std::exp(exponent(y));
  return g;
}

ShearedMetric::ShearedMetric(double amplitude, double period)
    : amplitude_(amplitude), period_(period) {}

Mat3 ShearedMetric::operator()(const Vec3& x) const {
  const double k = 2.0 * std::numbers::pi / period_;
  const double s = amplitude_ * k * std::cos(k * x[0]);
  Mat3 g = Mat3::Identity();
  g(0, 0) = 1.0 + s * s;
  g(0, 1) = g(1, 0) = s;
  return g;
}

namespace {
double param(const ParamMap& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}
double required(const ParamMap& p, const std::string& key, const std::string& metric) {
  auto it = p.find(key);
  if (it == p.end()) fail(ErrorCode::Validation, metric + " metric requires parameter '" + key + "'");
  return it->second;
}
}  // namespace

std::shared_ptr<const MetricFunction> make_metric(const std::string& name, const ParamMap& params,
                                                  const std::array<double, 3>& L) {
  if (name == "euclidean" || name == "flat") return std::make_shared<EuclideanMetric>();
  if (name == "warped" || name == "benchmark") {
    return std::make_shared<WarpedMetric>(
        required(params, "a1", name), required(params, "a2", name), required(params, "r0", name),
        Vec2(param(params, "c2", 0.5 * L[1]), param(params, "c3", 0.5 * L[2])), Vec2(L[1], L[2]));
  }
  if (name == "sheared") {
    return std::make_shared<ShearedMetric>(required(params, "amplitude", name), L[0]);
  }
  fail(ErrorCode::Validation, "unknown metric '" + name + "'");
}

MetricField make_metric_field(const Grid& grid, const std::string& name, const ParamMap& params) {
  return MetricField{grid, make_metric(name, params, grid.lengths)};
}

MetricBounds metric_bounds(const MetricField& m) {
  MetricBounds b{std::numeric_limits<double>::infinity(), 0.0};
  const Grid& G = m.grid;
  for (int i = 0; i < G.dims[0]; ++i)
    for (int j = 0; j < G.dims[1]; ++j)
      for (int k = 0; k < G.dims[2]; ++k) {
        Eigen::SelfAdjointEigenSolver<Mat3> es(m.at(G.node(i, j, k)), Eigen::EigenvaluesOnly);
        b.lambda_min = std::min(b.lambda_min, es.eigenvalues()[0]);
        b.lambda_max = std::max(b.lambda_max, es.eigenvalues()[2]);
      }
  return b;
}

}  // namespace vortexlab
