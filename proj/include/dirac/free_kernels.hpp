#ifndef DIRAC_DISPERSE_FREE_KERNELS_HPP
#define DIRAC_DISPERSE_FREE_KERNELS_HPP

#include <cmath>
#include <stdexcept>

#include "dirac/algebra.hpp"
#include "dirac/cutoff.hpp"
#include "dirac/types.hpp"

namespace dirac {

// Boundary value R0^{+-}(lambda) of the free massless Dirac resolvent, selected
// by the branch sign.
struct SpectralPoint {
  double lambda = 0.0;
  int sign = +1; // +1 -> R0^+, -1 -> R0^-
};

struct KernelSample {
  Vec3 x, y;
  double lambda = 0.0;
  Mat4 value;
};

namespace detail {

inline double separation(const Vec3& x, const Vec3& y, Vec3& ehat) {
  const Vec3 d = x - y;
  const double r = d.norm();
  if (r == 0.0) throw std::domain_error("free kernel evaluated on the diagonal x = y");
  ehat = d / r;
  return r;
}

// (z cos z - sin z), series near 0 where the leading terms cancel to O(z^3)
inline double zcos_minus_sin(double z) {
  if (std::abs(z) < 0.4) {
    const double z2 = z * z;
    return -z * z2 *
           (1.0 / 3.0 -
            z2 * (1.0 / 30.0 - z2 * (1.0 / 840.0 - z2 * (1.0 / 45360.0 - z2 / 3991680.0))));
  }
  return z * std::cos(z) - std::sin(z);
}

} // namespace detail

// Closed form of the limiting free resolvent kernel,
//   R0^s(lambda)(x,y) = e^{i s lambda r}/(4 pi r) [ (alpha.e)(s lambda + i/r) + lambda ],
// r = |x-y|, e = (x-y)/r. Both branches coincide at lambda = 0 with G0.
inline Mat4 resolvent_free(const SpectralPoint& p, const Vec3& x, const Vec3& y) {
  Vec3 e;
  const double r = detail::separation(x, y, e);
  const double s = static_cast<double>(p.sign);
  const cdouble phase = std::exp(iu * s * p.lambda * r) / (4.0 * pi * r);
  return phase * ((s * p.lambda + iu / r) * alpha_dot(e) + p.lambda * Mat4::Identity());
}

// d/dlambda and d^2/dlambda^2 of the kernel above, differentiated by hand.
inline Mat4 resolvent_free_dlambda(const SpectralPoint& p, const Vec3& x, const Vec3& y) {
  Vec3 e;
  const double r = detail::separation(x, y, e);
  const double s = static_cast<double>(p.sign);
  const Mat4 A = alpha_dot(e);
  const Mat4 P = (s * p.lambda + iu / r) * A + p.lambda * Mat4::Identity();
  const cdouble phase = std::exp(iu * s * p.lambda * r) / (4.0 * pi * r);
  return phase * (iu * s * r * P + s * A + Mat4::Identity());
}

inline Mat4 resolvent_free_d2lambda(const SpectralPoint& p, const Vec3& x, const Vec3& y) {
  Vec3 e;
  const double r = detail::separation(x, y, e);
  const double s = static_cast<double>(p.sign);
  const Mat4 A = alpha_dot(e);
  const Mat4 P = (s * p.lambda + iu / r) * A + p.lambda * Mat4::Identity();
  const cdouble phase = std::exp(iu * s * p.lambda * r) / (4.0 * pi * r);
  return phase * (-r * r * P + 2.0 * iu * r * (A + s * Mat4::Identity()));
}

// Leading low-energy expansion kernels:
//   G0 = i (alpha.e)/(4 pi r^2),  G1 = I/(4 pi r),  G2+- = +-I/(4 pi) + (alpha.e)/(8 pi)
struct GTerms {
  Mat4 G0, G1, G2plus, G2minus;
};

inline GTerms g_terms(const Vec3& x, const Vec3& y) {
  Vec3 e;
  const double r = detail::separation(x, y, e);
  const Mat4 A = alpha_dot(e);
  GTerms g;
  g.G0 = iu / (4.0 * pi * r * r) * A;
  g.G1 = Mat4::Identity() / (4.0 * pi * r);
  g.G2plus = Mat4::Identity() / (4.0 * pi) + A / (8.0 * pi);
  g.G2minus = -Mat4::Identity() / (4.0 * pi) + A / (8.0 * pi);
  return g;
}

// Expansion remainders, by exact subtraction of closed forms:
//   E1^s = R0^s - G0 - lambda G1
//   E2^s = E1^s - i lambda^2 G2^s
inline Mat4 expansion_error(int order, const SpectralPoint& p, const Vec3& x, const Vec3& y) {
  if (order != 1 && order != 2) throw std::invalid_argument("expansion_error: order must be 1 or 2");
  const GTerms g = g_terms(x, y);
  Mat4 err = resolvent_free(p, x, y) - g.G0 - p.lambda * g.G1;
  if (order == 2) {
    const Mat4& g2 = p.sign > 0 ? g.G2plus : g.G2minus;
    err -= iu * p.lambda * p.lambda * g2;
  }
  return err;
}

inline Mat4 expansion_error_dlambda(int order, const SpectralPoint& p, const Vec3& x, const Vec3& y) {
  if (order != 1 && order != 2) throw std::invalid_argument("expansion_error: order must be 1 or 2");
  const GTerms g = g_terms(x, y);
  Mat4 err = resolvent_free_dlambda(p, x, y) - g.G1;
  if (order == 2) {
    const Mat4& g2 = p.sign > 0 ? g.G2plus : g.G2minus;
    err -= 2.0 * iu * p.lambda * g2;
  }
  return err;
}

// Spectral density of the free operator, mu = R0^+ - R0^-, in the closed form
//   mu = (alpha.e) (lambda r cos(lambda r) - sin(lambda r))/(2 pi r^2)
//      + i lambda sin(lambda r)/(2 pi r) I.
// Entire in lambda; evaluated off-diagonal only (x != y enforced for uniformity).
inline Mat4 spectral_density_free(double lambda, const Vec3& x, const Vec3& y) {
  Vec3 e;
  const double r = detail::separation(x, y, e);
  const double z = lambda * r;
  const double ca = detail::zcos_minus_sin(z) / (2.0 * pi * r * r);
  const cdouble ci = iu * lambda * std::sin(z) / (2.0 * pi * r);
  return ca * alpha_dot(e) + ci * Mat4::Identity();
}

inline Mat4 spectral_density_free_dlambda(double lambda, const Vec3& x, const Vec3& y) {
  Vec3 e;
  const double r = detail::separation(x, y, e);
  const double z = lambda * r;
  const double ca = -lambda * std::sin(z) / (2.0 * pi);
  const cdouble ci = (iu * lambda * std::cos(z) + iu * std::sin(z) / r) / (2.0 * pi);
  return ca * alpha_dot(e) + ci * Mat4::Identity();
}

inline Mat4 spectral_density_free_d2lambda(double lambda, const Vec3& x, const Vec3& y) {
  Vec3 e;
  const double r = detail::separation(x, y, e);
  const double z = lambda * r;
  const double ca = -(std::sin(z) + z * std::cos(z)) / (2.0 * pi);
  const cdouble ci = (2.0 * iu * std::cos(z) - iu * z * std::sin(z)) / (2.0 * pi);
  return ca * alpha_dot(e) + ci * Mat4::Identity();
}

// mu1 = chi(lambda) mu(lambda)/lambda; the lambda -> 0 limit vanishes because
// mu = O(lambda^2).
inline Mat4 mu1(double lambda, const Vec3& x, const Vec3& y, const CutoffSpec& chi) {
  Vec3 e;
  detail::separation(x, y, e); // enforce x != y
  if (lambda == 0.0) return Mat4::Zero();
  return (chi.value(lambda) / lambda) * spectral_density_free(lambda, x, y);
}

// Low/high split R_L = chi(lambda r) R0, R_H = (1 - chi(lambda r)) R0;
// exact partition by construction.
struct LowHighSplit {
  Mat4 RL, RH;
};

inline LowHighSplit split_low_high(const SpectralPoint& p, const Vec3& x, const Vec3& y,
                                   const CutoffSpec& chi) {
  Vec3 e;
  const double r = detail::separation(x, y, e);
  const Mat4 R = resolvent_free(p, x, y);
  const double c = chi.value(p.lambda * r);
  return {c * R, (1.0 - c) * R};
}

inline LowHighSplit split_low_high_dlambda(const SpectralPoint& p, const Vec3& x, const Vec3& y,
                                           const CutoffSpec& chi) {
  Vec3 e;
  const double r = detail::separation(x, y, e);
  const Mat4 R = resolvent_free(p, x, y);
  const Mat4 dR = resolvent_free_dlambda(p, x, y);
  const double c = chi.value(p.lambda * r);
  const double dc = chi.derivative(p.lambda * r) * r;
  return {dc * R + c * dR, -dc * R + (1.0 - c) * dR};
}

} // namespace dirac

#endif
