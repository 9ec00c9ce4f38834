#ifndef DIRAC_DISPERSE_POTENTIAL_HPP
#define DIRAC_DISPERSE_POTENTIAL_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dirac/grid.hpp"
#include "dirac/types.hpp"

namespace dirac {

// Pointwise spectral factorization V = v* U v with v = |Lambda|^{1/2} B and
// U = diag(sign lambda_i), sign(0) := +1. B has rows of (adjoint) eigenvectors.
// Diagonal inputs take the position-preserving path (B = I), so e.g.
// diag(4,-1,0,0) -> v = diag(2,1,0,0), U = diag(1,-1,1,1). General Hermitian
// inputs are ordered descending by eigenvalue with a deterministic phase
// convention (first nonzero component of each eigenvector real positive).
struct PointFactorization {
  Mat4 v;
  Mat4 U;
};

inline PointFactorization factorize_pointwise(const Mat4& Vx) {
  const double scale = std::max(1.0, max_abs(Vx));
  if ((Vx - Vx.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("factorize_pointwise: input is not Hermitian");

  const double zero_tol = 1e-14 * scale;
  PointFactorization out;

  bool diagonal = true;
  for (int i = 0; i < 4 && diagonal; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j && std::abs(Vx(i, j)) > zero_tol) {
        diagonal = false;
        break;
      }

  if (diagonal) {
    out.v.setZero();
    out.U.setZero();
    for (int i = 0; i < 4; ++i) {
      const double lam = std::real(Vx(i, i));
      out.v(i, i) = std::sqrt(std::abs(lam));
      out.U(i, i) = (lam < -zero_tol) ? -1.0 : 1.0;
    }
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (Vx + Mat4(Vx.adjoint())));
  // descending order; solver returns ascending
  std::array<int, 4> order{3, 2, 1, 0};
  out.v.setZero();
  out.U.setZero();
  for (int row = 0; row < 4; ++row) {
    const int k = order[row];
    const double lam = es.eigenvalues()[k];
    Eigen::Vector4cd u = es.eigenvectors().col(k);
    for (int c = 0; c < 4; ++c) {
      if (std::abs(u[c]) > 1e-12) {
        u *= std::conj(u[c]) / std::abs(u[c]);
        break;
      }
    }
    out.v.row(row) = std::sqrt(std::abs(lam)) * u.adjoint();
    out.U(row, row) = (lam < -zero_tol) ? -1.0 : 1.0;
  }
  return out;
}

// Named potential families. All built-in envelopes are smooth; `coupling`
// multiplies the base profile and is the knob the threshold scan turns.
struct PotentialFamily {
  std::string kind = "zero"; // zero | gaussian-well | isotropic-scalar |
                             // diagonal-signature | off-diagonal-coupling | random-hermitian
  double delta = 4.0;        // asserted decay exponent of <x>^-delta envelopes
  double coupling = 0.0;     // g
  std::uint64_t seed = 0;
  double width = 1.0;        // gaussian width

  Mat4 direction() const {
    Mat4 C = Mat4::Identity();
    if (kind == "diagonal-signature") {
      C = Mat4::Zero();
      C.diagonal() << 1, -1, 1, -1;
    } else if (kind == "off-diagonal-coupling") {
      C = Mat4::Zero();
      C.block<2, 2>(0, 2).setIdentity();
      C.block<2, 2>(2, 0).setIdentity();
    } else if (kind == "random-hermitian") {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> nd(0.0, 1.0);
      Mat4 A;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) A(i, j) = cdouble(nd(rng), nd(rng));
      C = 0.5 * (A + Mat4(A.adjoint()));
      C /= max_abs(C);
    }
    return C;
  }

  double envelope(const Vec3& x) const {
    if (kind == "zero") return 0.0;
    if (kind == "gaussian-well") return -std::exp(-x.squaredNorm() / (width * width));
    return std::pow(jbracket(x), -delta);
  }

  Mat4 value(const Vec3& x) const { return coupling * envelope(x) * direction(); }
};

// A potential realized on a grid together with its Birman-Schwinger factors.
// Points where |v| falls below support_cut * max|v| are zeroed exactly (and V
// redefined as v*Uv there, so the factorization identity stays exact); these
// points never couple to the rest of the Birman-Schwinger algebra, which lets
// the operator work restrict to the support index set.
struct FactorizedPotential {
  const SpatialGrid* grid = nullptr;
  PotentialFamily family;
  std::vector<Mat4> V, v, U;
  std::vector<std::uint32_t> support; // indices with v != 0
  double support_cut = 1e-8;

  bool is_zero() const { return support.empty(); }
  std::size_t support_dof() const { return 4 * support.size(); }
};

inline FactorizedPotential sample_potential(const PotentialFamily& family, const SpatialGrid& grid,
                                            double support_cut = 1e-8) {
  FactorizedPotential pot;
  pot.grid = &grid;
  pot.family = family;
  pot.support_cut = support_cut;
  const std::size_t n = grid.size();
  pot.V.resize(n);
  pot.v.resize(n);
  pot.U.resize(n);
  double vmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Mat4 Vx = family.value(grid.points[i]);
    const PointFactorization f = factorize_pointwise(Vx);
    pot.V[i] = Vx;
    pot.v[i] = f.v;
    pot.U[i] = f.U;
    vmax = std::max(vmax, max_abs(f.v));
  }
  const double cut = support_cut * vmax;
  for (std::size_t i = 0; i < n; ++i) {
    if (vmax == 0.0 || max_abs(pot.v[i]) <= cut) {
      pot.v[i].setZero();
      pot.V[i].setZero();
    } else {
      pot.V[i] = pot.v[i].adjoint() * pot.U[i] * pot.v[i];
      pot.support.push_back(static_cast<std::uint32_t>(i));
    }
  }
  return pot;
}

// C = max over the grid of |V(x)| <x>^delta (entrywise max); the fitted
// constant of the decay hypothesis.
struct DecayCheck {
  double constant = 0.0;
  bool pass = false;
};

inline DecayCheck verify_decay(const FactorizedPotential& pot, const SpatialGrid& grid,
                               double delta) {
  DecayCheck out;
  for (std::size_t i = 0; i < grid.size(); ++i)
    out.constant =
        std::max(out.constant, max_abs(pot.V[i]) * std::pow(jbracket(grid.points[i]), delta));
  out.pass = std::isfinite(out.constant);
  return out;
}

} // namespace dirac

#endif
