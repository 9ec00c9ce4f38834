#ifndef DIRAC_DISPERSE_GRID_HPP
#define DIRAC_DISPERSE_GRID_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dirac/algebra.hpp"
#include "dirac/types.hpp"

namespace dirac {

enum class GridScheme { UniformTensor, RadialSpherical };

inline std::string to_string(GridScheme s) {
  return s == GridScheme::UniformTensor ? "uniform-tensor" : "radial-spherical";
}

// Spatial quadrature: points, positive weights, box/ball radius R.
// The uniform tensor scheme is an N^3 midpoint rule on [-R,R]^3 (no point at the
// origin, no collisions, sum of weights = (2R)^3).
struct SpatialGrid {
  std::vector<Vec3> points;
  std::vector<double> weights;
  double box_radius = 0.0;
  GridScheme scheme = GridScheme::UniformTensor;
  int n = 0;          // N per axis (uniform) or radial count (radial-spherical)
  double cell = 0.0;  // h for the uniform scheme

  std::size_t size() const { return points.size(); }
  std::size_t dof() const { return 4 * points.size(); }

  // flattened index of the uniform tensor point (ix, iy, iz), z fastest
  std::size_t tensor_index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(ix) * n + iy) * n + iz;
  }
};

namespace detail {

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (t * p1 - p0) / (t * t - 1.0);
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

} // namespace detail

inline SpatialGrid build_grid(GridScheme scheme, int N, double R) {
  if (N < 2 || R <= 0.0) throw std::invalid_argument("build_grid: need N >= 2 and R > 0");
  SpatialGrid g;
  g.scheme = scheme;
  g.box_radius = R;
  g.n = N;
  if (scheme == GridScheme::UniformTensor) {
    const double h = 2.0 * R / N;
    g.cell = h;
    g.points.reserve(static_cast<std::size_t>(N) * N * N);
    g.weights.assign(static_cast<std::size_t>(N) * N * N, h * h * h);
    for (int ix = 0; ix < N; ++ix)
      for (int iy = 0; iy < N; ++iy)
        for (int iz = 0; iz < N; ++iz)
          g.points.emplace_back(-R + (ix + 0.5) * h, -R + (iy + 0.5) * h, -R + (iz + 0.5) * h);
    return g;
  }
  // radial-spherical product: Gauss-Legendre in r and cos(theta), uniform phi
  std::vector<double> xr, wr, xc, wc;
  detail::gauss_legendre(N, xr, wr);
  const int ntheta = 8, nphi = 16;
  detail::gauss_legendre(ntheta, xc, wc);
  const double dphi = 2.0 * pi / nphi;
  for (int i = 0; i < N; ++i) {
    const double r = 0.5 * R * (xr[i] + 1.0);
    const double wrad = 0.5 * R * wr[i] * r * r;
    for (int j = 0; j < ntheta; ++j) {
      const double ct = xc[j], st = std::sqrt(1.0 - ct * ct);
      for (int k = 0; k < nphi; ++k) {
        const double phi = (k + 0.5) * dphi;
        g.points.emplace_back(r * st * std::cos(phi), r * st * std::sin(phi), r * ct);
        g.weights.push_back(wrad * wc[j] * dphi);
      }
    }
  }
  g.cell = R / N;
  return g;
}

// C^4-valued samples on a grid, stored flat (4 entries per point).
struct SpinorField {
  const SpatialGrid* grid = nullptr;
  CVec values;

  SpinorField() = default;
  explicit SpinorField(const SpatialGrid& g) : grid(&g), values(CVec::Zero(g.dof())) {}

  Eigen::Ref<Eigen::Vector4cd> at(std::size_t i) { return values.segment<4>(4 * i); }
  Eigen::Ref<const Eigen::Vector4cd> at(std::size_t i) const { return values.segment<4>(4 * i); }
};

inline cdouble dot_weighted(const SpatialGrid& g, const CVec& a, const CVec& b) {
  cdouble s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    s += g.weights[i] * a.segment<4>(4 * i).dot(b.segment<4>(4 * i));
  return s;
}

inline double norm_weighted(const SpatialGrid& g, const CVec& a) {
  return std::sqrt(std::real(dot_weighted(g, a, a)));
}

// Dense block matrix of an integral operator: block (i,j) = K(x_i, x_j) w_j.
struct GridOperator {
  const SpatialGrid* grid = nullptr;
  CMat mat;

  GridOperator() = default;
  explicit GridOperator(const SpatialGrid& g) : grid(&g), mat(CMat::Zero(g.dof(), g.dof())) {}

  Eigen::Ref<Mat4> block(std::size_t i, std::size_t j) { return mat.block<4, 4>(4 * i, 4 * j); }
  Eigen::Ref<const Mat4> block(std::size_t i, std::size_t j) const {
    return mat.block<4, 4>(4 * i, 4 * j);
  }
};

using KernelFn = std::function<Mat4(const Vec3&, const Vec3&)>;

// Radius of the ball with the same volume as a grid cell; the single constant
// behind the diagonal singularity rule.
inline constexpr double diag_ghost_factor = 0.62;

// Diagonal rule for singular kernels: the self block is the kernel averaged over
// the ghost pair x +- r_eff e1, r_eff = 0.62 h. Odd kernels (G0's alpha.e/r^2)
// average to zero; even kernels pick up their value at the effective radius.
inline Mat4 diag_block(const KernelFn& kernel, const Vec3& x, double local_h) {
  const Vec3 e1(1.0, 0.0, 0.0);
  const double eps = diag_ghost_factor * local_h;
  return 0.5 * (kernel(x + eps * e1, x) + kernel(x - eps * e1, x));
}

inline double local_cell_width(const SpatialGrid& g, std::size_t i) {
  return g.scheme == GridScheme::UniformTensor ? g.cell : std::cbrt(g.weights[i]);
}

inline GridOperator assemble(const KernelFn& kernel, const SpatialGrid& g) {
  GridOperator op(g);
  const std::ptrdiff_t np = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < np; ++i) {
    for (std::ptrdiff_t j = 0; j < np; ++j) {
      const Mat4 k = (i == j) ? diag_block(kernel, g.points[i], local_cell_width(g, i))
                              : kernel(g.points[i], g.points[j]);
      op.mat.block<4, 4>(4 * i, 4 * j) = k * g.weights[j];
    }
  }
  return op;
}

// y = (K f) without materializing the operator; same diagonal rule as assemble.
inline CVec apply_kernel_op(const KernelFn& kernel, const SpatialGrid& g, const CVec& f) {
  const std::ptrdiff_t np = static_cast<std::ptrdiff_t>(g.size());
  CVec out(g.dof());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < np; ++i) {
    Eigen::Vector4cd acc = Eigen::Vector4cd::Zero();
    for (std::ptrdiff_t j = 0; j < np; ++j) {
      const Mat4 k = (i == j) ? diag_block(kernel, g.points[i], local_cell_width(g, i))
                              : kernel(g.points[i], g.points[j]);
      acc += k * (g.weights[j] * f.segment<4>(4 * j));
    }
    out.segment<4>(4 * i) = acc;
  }
  return out;
}

// Discretized Hilbert-Schmidt norm: sqrt( sum_ij w_i w_j |K(x_i,x_j)|_F^2 ).
inline double hs_norm(const GridOperator& op) {
  const SpatialGrid& g = *op.grid;
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j)
      s += (g.weights[i] / g.weights[j]) * op.block(i, j).squaredNorm();
  return std::sqrt(s);
}

// Multiply field samples by <x>^sigma.
inline SpinorField apply_weight(const SpinorField& f, double sigma) {
  SpinorField out = f;
  const SpatialGrid& g = *f.grid;
  for (std::size_t i = 0; i < g.size(); ++i)
    out.values.segment<4>(4 * i) *= std::pow(jbracket(g.points[i]), sigma);
  return out;
}

// Conjugate operator blocks by <x_i>^{sigma_row} ... <x_j>^{sigma_col}.
inline GridOperator apply_weight(const GridOperator& op, double sigma_row, double sigma_col) {
  GridOperator out = op;
  const SpatialGrid& g = *op.grid;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double wr = std::pow(jbracket(g.points[i]), sigma_row);
    for (std::size_t j = 0; j < g.size(); ++j)
      out.mat.block<4, 4>(4 * i, 4 * j) =
          wr * op.block(i, j) * std::pow(jbracket(g.points[j]), sigma_col);
  }
  return out;
}

// W^{1/2} T W^{-1/2}: block(i,j) -> block(i,j) sqrt(w_i / w_j), mapping the
// weighted L^2 geometry onto the plain Euclidean one. Hermitian-symmetric
// kernels become Hermitian matrices.
inline CMat symmetrized(const GridOperator& op) {
  const SpatialGrid& g = *op.grid;
  CMat s = op.mat;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double wi = std::sqrt(g.weights[i]);
    for (std::size_t j = 0; j < g.size(); ++j)
      s.block<4, 4>(4 * i, 4 * j) *= wi / std::sqrt(g.weights[j]);
  }
  return s;
}

// Integral of a kernel over one cubic cell by tensor Gauss-Legendre product
// integration. Used where a point-source (midpoint) sum is too rough: near the
// 1/r^2 singularity the cell integral is finite and smooth in x, while the
// midpoint sample is a spike.
inline Mat4 cell_integral(const KernelFn& kernel, const Vec3& x, const Vec3& center, double h,
                          int q = 6) {
  static thread_local std::vector<double> gx, gw;
  static thread_local int gq = 0;
  if (gq != q) {
    detail::gauss_legendre(q, gx, gw);
    gq = q;
  }
  Mat4 acc = Mat4::Zero();
  const double half = 0.5 * h;
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b)
      for (int c = 0; c < q; ++c) {
        const Vec3 z = center + half * Vec3(gx[a], gx[b], gx[c]);
        acc += (gw[a] * gw[b] * gw[c]) * kernel(x, z);
      }
  return acc * (half * half * half);
}

// 4th-order finite-difference application of D0 = -i alpha . grad on a uniform
// tensor grid, with one-sided closures at the box boundary.
inline CVec apply_free_dirac_fd(const SpatialGrid& g, const CVec& f) {
  if (g.scheme != GridScheme::UniformTensor)
    throw std::invalid_argument("apply_free_dirac_fd: uniform tensor grid required");
  const int N = g.n;
  if (N < 5) throw std::invalid_argument("apply_free_dirac_fd: need N >= 5 for the 4th-order stencil");
  const double h = g.cell;
  const auto& A = dirac_matrices().alpha;

  auto line_derivative = [&](auto&& sample, int m, Eigen::Matrix<cdouble, 4, 1>* out) {
    // sample(k) -> Vector4cd along the line, k = 0..m-1
    for (int k = 0; k < m; ++k) {
      Eigen::Vector4cd d;
      if (k >= 2 && k <= m - 3) {
        d = (-sample(k + 2) + 8.0 * sample(k + 1) - 8.0 * sample(k - 1) + sample(k - 2)) / (12.0 * h);
      } else if (k == 0) {
        d = (-25.0 * sample(0) + 48.0 * sample(1) - 36.0 * sample(2) + 16.0 * sample(3) -
             3.0 * sample(4)) /
            (12.0 * h);
      } else if (k == 1) {
        d = (-3.0 * sample(0) - 10.0 * sample(1) + 18.0 * sample(2) - 6.0 * sample(3) + sample(4)) /
            (12.0 * h);
      } else if (k == m - 2) {
        d = (3.0 * sample(m - 1) + 10.0 * sample(m - 2) - 18.0 * sample(m - 3) +
             6.0 * sample(m - 4) - sample(m - 5)) /
            (12.0 * h);
      } else { // k == m - 1
        d = (25.0 * sample(m - 1) - 48.0 * sample(m - 2) + 36.0 * sample(m - 3) -
             16.0 * sample(m - 4) + 3.0 * sample(m - 5)) /
            (12.0 * h);
      }
      out[k] = d;
    }
  };

  CVec result = CVec::Zero(g.dof());
  std::vector<Eigen::Vector4cd> deriv(N);
  for (int axis = 0; axis < 3; ++axis) {
    for (int a = 0; a < N; ++a) {
      for (int b = 0; b < N; ++b) {
        auto idx = [&](int k) {
          const int ijk[3][3] = {{k, a, b}, {a, k, b}, {a, b, k}};
          return g.tensor_index(ijk[axis][0], ijk[axis][1], ijk[axis][2]);
        };
        line_derivative([&](int k) { return f.segment<4>(4 * idx(k)); }, N, deriv.data());
        for (int k = 0; k < N; ++k) result.segment<4>(4 * idx(k)) += -iu * (A[axis] * deriv[k]);
      }
    }
  }
  return result;
}

} // namespace dirac

#endif
