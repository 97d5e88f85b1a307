#pragma once

#include <map>
#include <memory>
#include <string>

#include "vortexlab/grid.hpp"

namespace vortexlab {

using ParamMap = std::map<std::string, double>;

// Closed-form metric tensor g(x). Implementations must be periodic in the
// periodic box axes and evaluable anywhere, not only at grid nodes.
class MetricFunction {
 public:
  virtual ~MetricFunction() = default;
  virtual Mat3 operator()(const Vec3& x) const = 0;
  virtual std::string name() const = 0;
  // True when g is diagonal everywhere, which lets the field operators skip
  // the mixed-derivative stencil.
  virtual bool diagonal() const { return false; }
};

// Quintic smoothstep: 0 for s <= 0, 1 for s >= 1, C^2 at both joints.
double smoothstep5(double s);
double smoothstep5_derivative(double s);

// Benchmark metric e^{2 phi chi} dt^2 + dy1^2 + dy2^2, t = x1,
// y = (x2, x3) - center, phi = (a1 y1^2 - a2 y2^2)/2, chi a radial cutoff
// equal to 1 on [0, r0/2] and 0 beyond r0.
class WarpedMetric final : public MetricFunction {
 public:
  WarpedMetric(double a1, double a2, double r0, const Vec2& center, const Vec2& period);
  Mat3 operator()(const Vec3& x) const override;
  std::string name() const override { return "warped"; }
  bool diagonal() const override { return true; }
  // Exponent 2 phi chi at a transverse offset y.
  double exponent(const Vec2& y) const;

 private:
  double a1_, a2_, r0_;
  Vec2 center_, period_;
};

// Pullback of the Euclidean metric by x -> x + (0, A sin(2 pi x1 / L1), 0).
// Geodesics are preimages of straight lines, which makes exp_map exact.
class ShearedMetric final : public MetricFunction {
 public:
  ShearedMetric(double amplitude, double period);
  Mat3 operator()(const Vec3& x) const override;
  std::string name() const override { return "sheared"; }
  double amplitude() const { return amplitude_; }
  double period() const { return period_; }

 private:
  double amplitude_, period_;
};

class EuclideanMetric final : public MetricFunction {
 public:
  Mat3 operator()(const Vec3&) const override { return Mat3::Identity(); }
  std::string name() const override { return "euclidean"; }
  bool diagonal() const override { return true; }
};

// Registry keyed by name. Recognized names: "euclidean", "warped" (params a1,
// a2, r0, optional c2, c3 for the axis position), "sheared" (param amplitude).
std::shared_ptr<const MetricFunction> make_metric(const std::string& name, const ParamMap& params,
                                                  const std::array<double, 3>& box_lengths);

struct MetricField {
  Grid grid;
  std::shared_ptr<const MetricFunction> fn;

  Mat3 at(const Vec3& x) const { return (*fn)(x); }
};

MetricField make_metric_field(const Grid& grid, const std::string& name, const ParamMap& params);

// Extreme eigenvalues of g over the grid nodes (and of g^{-1} via 1/lambda).
struct MetricBounds {
  double lambda_min = 1.0;
  double lambda_max = 1.0;
};
MetricBounds metric_bounds(const MetricField& m);

}  // namespace vortexlab
