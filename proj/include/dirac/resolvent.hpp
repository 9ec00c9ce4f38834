#ifndef DIRAC_DISPERSE_RESOLVENT_HPP
#define DIRAC_DISPERSE_RESOLVENT_HPP

#include <memory>
#include <sstream>
#include <stdexcept>

#include "dirac/threshold.hpp"

namespace dirac {

// M(lambda) = U + v R0^{+-}(lambda) v*, assembled in symmetrized coordinates on
// the potential support. The Frobenius norm of this matrix (or of differences
// of such matrices) is the discrete Hilbert-Schmidt norm.
struct MOperator {
  SpectralPoint p;
  CMat mat; // (4m x 4m), m = support size
};

inline MOperator assemble_M(const FactorizedPotential& pot, const SpatialGrid& g,
                            const SpectralPoint& p) {
  MOperator m;
  m.p = p;
  auto kernel = [p](const Vec3& x, const Vec3& y) { return resolvent_free(p, x, y); };
  m.mat = detail::sandwich_symmetrized(pot, g, kernel, 1.0);
  return m;
}

enum class InvertRoute { Direct, Neumann, JensenNenciu };

inline const char* to_string(InvertRoute r) {
  switch (r) {
    case InvertRoute::Direct: return "direct";
    case InvertRoute::Neumann: return "neumann";
    default: return "jensen-nenciu";
  }
}

// Factorized application of M^{-1}(lambda). The Jensen-Nenciu route builds
//   M^{-1} = (M+S1)^{-1} + (M+S1)^{-1} S1 B^{-1} S1 (M+S1)^{-1},
//   B = S1 - S1 (M+S1)^{-1} S1,
// with B inverted on the explicit rank-r kernel block.
struct MInverse {
  SpectralPoint p;
  InvertRoute route = InvertRoute::Direct;
  std::shared_ptr<Eigen::PartialPivLU<CMat>> lu; // M (direct) or M + S1 (JN)
  CMat phi;  // kernel basis for JN
  CMat binv; // r x r
  CMat dense;
  bool have_dense = false;
  bool neumann_converged = true;
  int neumann_terms = 0;
  double cond = 0.0;

  CMat solve(const CMat& rhs) const {
    if (have_dense) return dense * rhs;
    if (route == InvertRoute::JensenNenciu && phi.cols() > 0) {
      const CMat u = lu->solve(rhs);
      const CMat w = binv * (phi.adjoint() * u);
      return u + lu->solve(CMat(phi * w));
    }
    return lu->solve(rhs);
  }
};

struct InvertOptions {
  InvertRoute route = InvertRoute::Direct;
  bool materialize = false;
  double neumann_tol = 1e-10;
  int neumann_max_terms = 50;
};

inline MInverse invert_M(const MOperator& m, const ThresholdReport& rep,
                         const FactorizedPotential& pot, const SpatialGrid& g,
                         InvertOptions opt = {}) {
  MInverse inv;
  inv.p = m.p;
  inv.route = opt.route;
  const std::ptrdiff_t n = m.mat.rows();

  if (!rep.regular && opt.route != InvertRoute::JensenNenciu && m.p.lambda == 0.0)
    throw std::invalid_argument("invert_M: M(0) is singular when zero is not regular");

  if (opt.route == InvertRoute::Neumann) {
    // D1 sum_k (-(M - T0) D1)^k, valid for small |lambda| and good conditioning
    auto g0 = [](const Vec3& x, const Vec3& y) { return g_terms(x, y).G0; };
    const CMat T0 = detail::sandwich_symmetrized(pot, g, g0, 1.0);
    const CMat D1 = Eigen::PartialPivLU<CMat>(T0).solve(CMat::Identity(n, n));
    const CMat step = -(m.mat - T0) * D1;
    CMat term = D1;
    CMat acc = D1;
    inv.neumann_converged = false;
    for (int k = 1; k <= opt.neumann_max_terms; ++k) {
      term = term * step;
      acc += term;
      inv.neumann_terms = k;
      const double ratio = term.norm() / acc.norm();
      if (ratio < opt.neumann_tol) {
        inv.neumann_converged = true;
        break;
      }
      if (ratio > 1.0) break; // divergent; fall back below
    }
    if (inv.neumann_converged) {
      inv.dense = acc;
      inv.have_dense = true;
      return inv;
    }
    inv.route = InvertRoute::Direct; // fallback with a warning flag left set
  }

  if (inv.route == InvertRoute::JensenNenciu && !rep.regular) {
    const int r = rep.kernel_dim();
    inv.phi = rep.kernel_basis_sym;
    CMat MpS = m.mat + inv.phi * inv.phi.adjoint();
    inv.lu = std::make_shared<Eigen::PartialPivLU<CMat>>(std::move(MpS));
    inv.cond = 1.0 / std::max(inv.lu->rcond(), 1e-300);
    const CMat B = CMat::Identity(r, r) - inv.phi.adjoint() * inv.lu->solve(inv.phi);
    Eigen::FullPivLU<CMat> blu(B);
    if (!blu.isInvertible()) {
      std::ostringstream os;
      os << "invert_M: Jensen-Nenciu B block singular at lambda = " << m.p.lambda;
      throw std::runtime_error(os.str());
    }
    inv.binv = blu.inverse();
  } else {
    inv.route = inv.route == InvertRoute::JensenNenciu ? InvertRoute::Direct : inv.route;
    inv.lu = std::make_shared<Eigen::PartialPivLU<CMat>>(m.mat);
    inv.cond = 1.0 / std::max(inv.lu->rcond(), 1e-300);
    const CVec probe = detail::deterministic_block(n, 1, 0x5eed0005).col(0);
    if (!inv.lu->solve(probe).allFinite()) {
      std::ostringstream os;
      os << "invert_M: singular M at lambda = " << m.p.lambda
         << " (sigma_min ~ " << 1.0 / inv.cond << ")";
      throw std::runtime_error(os.str());
    }
  }
  if (opt.materialize && !inv.have_dense) {
    inv.dense = inv.solve(CMat::Identity(n, n));
    inv.have_dense = true;
  }
  return inv;
}

// All-pairs evaluation of the perturbed resolvent kernel on a point list via
// the symmetric resolvent identity
//   R_V(x,y) = R0(x,y) - sum_ab [R0(x,.)v* sqrt(w)]_a [M^{-1}]_ab [sqrt(w) v R0(.,y)]_b.
// The evaluation points may sit anywhere off the grid diagonal; the potential
// integral runs over the support only.
struct PairKernels {
  std::vector<Vec3> points;
  std::vector<std::vector<Mat4>> value; // value[i][j] = K(points[i], points[j])
};

inline PairKernels perturbed_resolvent(const FactorizedPotential& pot, const SpatialGrid& g,
                                       const SpectralPoint& p, const MInverse& inv,
                                       const std::vector<Vec3>& points) {
  PairKernels out;
  out.points = points;
  const std::size_t np = points.size();
  out.value.assign(np, std::vector<Mat4>(np, Mat4::Zero()));

  const std::size_t m = pot.support.size();
  CMat B(4 * m, 4 * np), A(4 * np, 4 * m);
  if (m > 0) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(m); ++a) {
      const std::uint32_t ia = pot.support[a];
      const double sw = std::sqrt(g.weights[ia]);
      for (std::size_t j = 0; j < np; ++j) {
        B.block<4, 4>(4 * a, 4 * j) = sw * (pot.v[ia] * resolvent_free(p, g.points[ia], points[j]));
        A.block<4, 4>(4 * j, 4 * a) =
            sw * (resolvent_free(p, points[j], g.points[ia]) * Mat4(pot.v[ia].adjoint()));
      }
    }
  }
  const CMat X = (m > 0) ? inv.solve(B) : CMat();
  const CMat corr = (m > 0) ? CMat(A * X) : CMat();

  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < np; ++j) {
      Mat4 val = resolvent_free(p, points[i], points[j]);
      if (m > 0) val -= corr.block<4, 4>(4 * i, 4 * j);
      out.value[i][j] = val;
    }
  return out;
}

// Spectral density (2 pi i)^{-1} [R_V^+ - R_V^-](lambda) on all pairs of a
// point list. The minus branch comes from the exact discrete adjoint symmetry
// R_V^-(x,y) = [R_V^+(y,x)]^H, so one factorization per lambda suffices.
inline PairKernels spectral_density(const FactorizedPotential& pot, const SpatialGrid& g,
                                    const ThresholdReport& rep, double lambda,
                                    const std::vector<Vec3>& points,
                                    const InvertOptions& opt = {}) {
  if (!rep.regular && lambda == 0.0)
    throw std::invalid_argument("spectral_density: lambda = 0 excluded when zero is not regular");

  PairKernels out;
  out.points = points;
  const std::size_t np = points.size();
  out.value.assign(np, std::vector<Mat4>(np, Mat4::Zero()));

  if (pot.is_zero()) {
    for (std::size_t i = 0; i < np; ++i)
      for (std::size_t j = 0; j < np; ++j)
        if (i != j)
          out.value[i][j] = spectral_density_free(lambda, points[i], points[j]) / (2.0 * pi * iu);
    return out;
  }

  const SpectralPoint p{lambda, +1};
  InvertOptions o = opt;
  o.route = rep.regular ? InvertRoute::Direct : InvertRoute::JensenNenciu;
  const MOperator m = assemble_M(pot, g, p);
  const MInverse inv = invert_M(m, rep, pot, g, o);
  const PairKernels plus = perturbed_resolvent(pot, g, p, inv, points);

  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < np; ++j) {
      if (i == j) continue;
      out.value[i][j] = (plus.value[i][j] - Mat4(plus.value[j][i].adjoint())) / (2.0 * pi * iu);
    }
  return out;
}

// k-th Born term R0 (V R0)^k at a single point pair by nested grid quadrature.
inline Mat4 born_series_term(const FactorizedPotential& pot, const SpatialGrid& g,
                             const SpectralPoint& p, int k, const Vec3& x, const Vec3& y) {
  if (k < 0 || k > 2) throw std::invalid_argument("born_series_term: k must be 0, 1 or 2");
  if (k == 0 || pot.is_zero()) return k == 0 ? resolvent_free(p, x, y) : Mat4::Zero();

  auto kernel = [p](const Vec3& a, const Vec3& b) { return resolvent_free(p, a, b); };
  const std::size_t m = pot.support.size();

  if (k == 1) {
    Mat4 acc = Mat4::Zero();
    for (std::size_t a = 0; a < m; ++a) {
      const std::uint32_t ia = pot.support[a];
      acc += resolvent_free(p, x, g.points[ia]) * pot.V[ia] *
             resolvent_free(p, g.points[ia], y) * g.weights[ia];
    }
    return acc;
  }

  // k == 2: cache the middle kernel column with the ghost diagonal rule
  std::vector<Mat4> right(m);
  for (std::size_t b = 0; b < m; ++b) {
    const std::uint32_t ib = pot.support[b];
    right[b] = pot.V[ib] * resolvent_free(p, g.points[ib], y) * g.weights[ib];
  }
  Mat4 acc = Mat4::Zero();
  for (std::size_t a = 0; a < m; ++a) {
    const std::uint32_t ia = pot.support[a];
    Mat4 mid = Mat4::Zero();
    for (std::size_t b = 0; b < m; ++b) {
      const std::uint32_t ib = pot.support[b];
      const Mat4 kk = (ia == ib) ? diag_block(kernel, g.points[ia], local_cell_width(g, ia))
                                 : resolvent_free(p, g.points[ia], g.points[ib]);
      mid += kk * right[b];
    }
    acc += resolvent_free(p, x, g.points[ia]) * pot.V[ia] * mid * g.weights[ia];
  }
  return acc;
}

} // namespace dirac

#endif
