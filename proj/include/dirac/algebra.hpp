#ifndef DIRAC_DISPERSE_ALGEBRA_HPP
#define DIRAC_DISPERSE_ALGEBRA_HPP

#include <array>
#include <stdexcept>

#include "dirac/types.hpp"

namespace dirac {

// The 4x4 Dirac matrix algebra in the chiral-free representation
//   beta = diag(I2, -I2),  alpha_i = [[0, sigma_i], [sigma_i, 0]]
// with sigma_1 = [[0,-i],[i,0]], sigma_2 = [[0,1],[1,0]], sigma_3 = diag(1,-1).
// All entries lie in {0, +-1, +-i}; alpha_j alpha_k + alpha_k alpha_j = 2 delta_jk I
// for j,k in {0,1,2,3} with beta participating as alpha_0.
struct DiracMatrices {
  std::array<Mat4, 3> alpha;
  Mat4 beta;
};

inline const DiracMatrices& dirac_matrices() {
  static const DiracMatrices m = [] {
    DiracMatrices d;
    Eigen::Matrix2cd s1, s2, s3, i2;
    s1 << 0, -iu, iu, 0;
    s2 << 0, 1, 1, 0;
    s3 << 1, 0, 0, -1;
    i2.setIdentity();
    const std::array<Eigen::Matrix2cd, 3> sigma{s1, s2, s3};
    for (int k = 0; k < 3; ++k) {
      d.alpha[k].setZero();
      d.alpha[k].block<2, 2>(0, 2) = sigma[k];
      d.alpha[k].block<2, 2>(2, 0) = sigma[k];
    }
    d.beta.setZero();
    d.beta.block<2, 2>(0, 0) = i2;
    d.beta.block<2, 2>(2, 2) = -i2;
    return d;
  }();
  return m;
}

// alpha . v = sum_k v_k alpha_k; Hermitian, (alpha.v)^2 = |v|^2 I
inline Mat4 alpha_dot(const Vec3& v) {
  const auto& d = dirac_matrices();
  return v[0] * d.alpha[0] + v[1] * d.alpha[1] + v[2] * d.alpha[2];
}

// Massless symbol A(xi) = alpha . xi; eigenvalues +-|xi|, each twice,
// and A*(xi)A(xi) = |xi|^2 I.
inline Mat4 dirac_symbol(const Vec3& xi) { return alpha_dot(xi); }

// exp(-i t A(xi)) = cos(t|xi|) I - i sin(t|xi|) A(xi)/|xi|; identity at xi = 0
// (removable singularity).
inline Mat4 symbol_propagator(const Vec3& xi, double t) {
  const double k = xi.norm();
  if (k == 0.0) return Mat4::Identity();
  return std::cos(t * k) * Mat4::Identity() - iu * (std::sin(t * k) / k) * alpha_dot(xi);
}

// Unit direction (x-y)/|x-y|; rejects the diagonal.
struct UnitVector3 {
  Vec3 e;
  explicit UnitVector3(const Vec3& v) : e(v) {
    const double n = v.norm();
    if (n == 0.0) throw std::invalid_argument("UnitVector3: zero vector");
    e /= n;
    if (std::abs(e.norm() - 1.0) > 1e-12) throw std::invalid_argument("UnitVector3: normalization failed");
  }
};

} // namespace dirac

#endif
