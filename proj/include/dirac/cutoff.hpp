#ifndef DIRAC_DISPERSE_CUTOFF_HPP
#define DIRAC_DISPERSE_CUTOFF_HPP

#include <cmath>
#include <stdexcept>

namespace dirac {

// Smooth even cutoff chi: identically 1 on [-lambda0/2, lambda0/2], identically 0
// outside [-lambda0, lambda0], with a quintic-smoothstep roll-off in between.
// C^2 with closed-form first and second derivatives.
class CutoffSpec {
 public:
  explicit CutoffSpec(double lambda0 = 0.5) : lambda0_(lambda0) {
    if (lambda0 <= 0) throw std::invalid_argument("CutoffSpec: lambda0 must be positive");
  }

  double lambda0() const { return lambda0_; }

  double value(double lam) const {
    const double u = std::abs(lam) / lambda0_;
    if (u <= 0.5) return 1.0;
    if (u >= 1.0) return 0.0;
    const double s = 2.0 * (u - 0.5);
    return 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
  }

  double derivative(double lam) const {
    const double u = std::abs(lam) / lambda0_;
    if (u <= 0.5 || u >= 1.0) return 0.0;
    const double s = 2.0 * (u - 0.5);
    const double ds = 30.0 * s * s * (1.0 - s) * (1.0 - s);
    const double sign = lam > 0 ? 1.0 : -1.0;
    return -ds * 2.0 / lambda0_ * sign;
  }

  double second_derivative(double lam) const {
    const double u = std::abs(lam) / lambda0_;
    if (u <= 0.5 || u >= 1.0) return 0.0;
    const double s = 2.0 * (u - 0.5);
    const double dds = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
    return -dds * 4.0 / (lambda0_ * lambda0_);
  }

 private:
  double lambda0_;
};

} // namespace dirac

#endif
