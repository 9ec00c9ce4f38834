#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <random>

#include "dirac/free_kernels.hpp"
#include "dirac/grid.hpp"
#include "dirac/potential.hpp"

using namespace dirac;

TEST_CASE("grid construction") {
  SECTION("midpoint 2^3 grid on [-1,1]^3") {
    const SpatialGrid g = build_grid(GridScheme::UniformTensor, 2, 1.0);
    REQUIRE(g.size() == 8);
    double wsum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (int c = 0; c < 3; ++c) REQUIRE(std::abs(std::abs(g.points[i][c]) - 0.5) < 1e-15);
      REQUIRE(g.weights[i] == Catch::Approx(1.0));
      wsum += g.weights[i];
    }
    REQUIRE(wsum == Catch::Approx(8.0).margin(1e-10));
  }

  SECTION("8^3 grid on [-6,6]^3") {
    const SpatialGrid g = build_grid(GridScheme::UniformTensor, 8, 6.0);
    REQUIRE(g.size() == 512);
    double maxc = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      maxc = std::max(maxc, g.points[i].cwiseAbs().maxCoeff());
      wsum += g.weights[i];
    }
    REQUIRE(maxc == Catch::Approx(5.25));
    REQUIRE(wsum == Catch::Approx(12.0 * 12.0 * 12.0).margin(1e-9));
  }

  SECTION("invalid sizes rejected") {
    REQUIRE_THROWS_AS(build_grid(GridScheme::UniformTensor, 1, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(build_grid(GridScheme::UniformTensor, 4, -2.0), std::invalid_argument);
  }

  SECTION("radial-spherical weights sum to the ball volume") {
    const SpatialGrid g = build_grid(GridScheme::RadialSpherical, 12, 3.0);
    double wsum = 0.0;
    for (double w : g.weights) {
      REQUIRE(w > 0.0);
      wsum += w;
    }
    REQUIRE(wsum == Catch::Approx(4.0 / 3.0 * pi * 27.0).epsilon(1e-10));
  }
}

TEST_CASE("quadrature sanity for <x>^-4") {
  // The exact integral over [-6,6]^3 is 8.15156863708 (high-resolution reference);
  // the R -> infinity value is pi^2 = 9.8696..., so the R = 6 box already sits
  // 17.4% below the full-space value. The midpoint rule must hit the box value
  // to ~1%; the truncation deficit is what it is and is pinned here.
  const SpatialGrid g = build_grid(GridScheme::UniformTensor, 16, 6.0);
  double q = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    q += g.weights[i] * std::pow(jbracket(g.points[i]), -4.0);
  REQUIRE(q == Catch::Approx(8.15156863708).epsilon(0.01));
  const double deficit = 1.0 - q / (pi * pi);
  REQUIRE(deficit > 0.15);
  REQUIRE(deficit < 0.20);
}

TEST_CASE("operator assembly") {
  const SpatialGrid g = build_grid(GridScheme::UniformTensor, 2, 1.0);

  SECTION("constant kernel scales block columns by the weights") {
    const GridOperator op = assemble([](const Vec3&, const Vec3&) { return Mat4::Identity(); }, g);
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j)
        REQUIRE((op.block(i, j) - g.weights[j] * Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-15);
  }

  SECTION("G1 kernel blocks match the hand formula; diagonal uses the ghost rule") {
    const GridOperator op =
        assemble([](const Vec3& x, const Vec3& y) { return g_terms(x, y).G1; }, g);
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double r = (i == j) ? diag_ghost_factor * g.cell : (g.points[i] - g.points[j]).norm();
        const Mat4 expected = g.weights[j] / (4.0 * pi * r) * Mat4::Identity();
        REQUIRE((op.block(i, j) - expected).cwiseAbs().maxCoeff() < 1e-14);
      }
  }

  SECTION("G0 diagonal blocks vanish by odd symmetry") {
    const GridOperator op =
        assemble([](const Vec3& x, const Vec3& y) { return g_terms(x, y).G0; }, g);
    for (std::size_t i = 0; i < g.size(); ++i)
      REQUIRE(op.block(i, i).cwiseAbs().maxCoeff() < 1e-14);
  }

  SECTION("assembly is linear in the kernel") {
    auto k1 = [](const Vec3& x, const Vec3& y) { return g_terms(x, y).G1; };
    auto k2 = [](const Vec3& x, const Vec3& y) { return g_terms(x, y).G0; };
    const cdouble a(1.7, 0.0), b(-0.4, 0.0);
    const GridOperator combo = assemble(
        [&](const Vec3& x, const Vec3& y) { return Mat4(a * k1(x, y) + b * k2(x, y)); }, g);
    const CMat direct = a * assemble(k1, g).mat + b * assemble(k2, g).mat;
    REQUIRE((combo.mat - direct).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("sandwiched v G0 v* is Hermitian after weight symmetrization") {
    const SpatialGrid g4 = build_grid(GridScheme::UniformTensor, 4, 3.0);
    PotentialFamily fam;
    fam.kind = "random-hermitian";
    fam.delta = 4.0;
    fam.coupling = 2.0;
    fam.seed = 42;
    const FactorizedPotential pot = sample_potential(fam, g4);
    const GridOperator op =
        assemble([&](const Vec3& x, const Vec3& y) { return g_terms(x, y).G0; }, g4);
    GridOperator vkv = op;
    for (std::size_t i = 0; i < g4.size(); ++i)
      for (std::size_t j = 0; j < g4.size(); ++j)
        vkv.mat.block<4, 4>(4 * i, 4 * j) = pot.v[i] * op.block(i, j) * Mat4(pot.v[j].adjoint());
    const CMat s = symmetrized(vkv);
    REQUIRE((s - CMat(s.adjoint())).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Hilbert-Schmidt norm") {
  const SpatialGrid g = build_grid(GridScheme::UniformTensor, 2, 1.0);

  SECTION("zero and identity kernels") {
    GridOperator zero(g);
    REQUIRE(hs_norm(zero) == 0.0);
    const GridOperator op = assemble([](const Vec3&, const Vec3&) { return Mat4::Identity(); }, g);
    REQUIRE(hs_norm(op) == Catch::Approx(16.0).epsilon(1e-12));
  }

  SECTION("equals the Frobenius norm of the symmetrized matrix") {
    const GridOperator op =
        assemble([](const Vec3& x, const Vec3& y) { return g_terms(x, y).G1; }, g);
    REQUIRE(hs_norm(op) == Catch::Approx(symmetrized(op).norm()).epsilon(1e-12));
  }
}

TEST_CASE("weights <x>^sigma") {
  const SpatialGrid g = build_grid(GridScheme::UniformTensor, 4, 2.0);
  SpinorField f(g);
  f.values.setOnes();

  const SpinorField id = apply_weight(f, 0.0);
  REQUIRE((id.values - f.values).cwiseAbs().maxCoeff() == 0.0);

  REQUIRE(jbracket(Vec3(0, 0, 0)) == 1.0);
  REQUIRE(std::pow(jbracket(Vec3(1, 1, 1)), 2.0) == Catch::Approx(4.0));

  const SpinorField w = apply_weight(f, 2.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    REQUIRE(std::real(w.values[4 * i]) ==
            Catch::Approx(1.0 + g.points[i].squaredNorm()).epsilon(1e-13));
}

TEST_CASE("spatial estimate spot checks") {
  const SpatialGrid g = build_grid(GridScheme::UniformTensor, 16, 6.0);

  SECTION("three-factor integral bounded by C/|x-y|") {
    // integral of <z>^-2.1 |z-x|^-2 |y-z|^-1 dz against 1/|x-y|
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> ud(-3.0, 3.0);
    double c_all = 0.0, c_near = 0.0;
    for (int trial = 0; trial < 24; ++trial) {
      Vec3 x(ud(rng), ud(rng), ud(rng)), y(ud(rng), ud(rng), ud(rng));
      x += Vec3(0.11, 0.07, 0.05); // keep off grid points
      y += Vec3(0.03, 0.13, 0.09);
      const double sep = (x - y).norm();
      if (sep < 0.2) continue;
      double integral = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3& z = g.points[i];
        integral += g.weights[i] * std::pow(jbracket(z), -2.1) /
                    ((z - x).squaredNorm() * (y - z).norm());
      }
      const double ratio = integral * sep;
      c_all = std::max(c_all, ratio);
      if (sep < 1.0) c_near = std::max(c_near, ratio);
    }
    REQUIRE(std::isfinite(c_all));
    REQUIRE(c_all > 0.0);
    REQUIRE(c_near <= 1.5 * c_all);
  }

  SECTION("two-factor integral bounded by C <y>^{3-k-delta}") {
    // integral of <x>^-2.5 |x-y|^-2 dx against <y>^-1.5
    double c_all = 0.0, c_far = 0.0;
    for (double yr : {0.0, 0.7, 1.5, 2.9, 4.4}) {
      const Vec3 y(yr + 0.13, 0.21, -0.08);
      double integral = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec3& x = g.points[i];
        integral += g.weights[i] * std::pow(jbracket(x), -2.5) / (x - y).squaredNorm();
      }
      const double ratio = integral / std::pow(jbracket(y), 3.0 - 2.0 - 2.5);
      c_all = std::max(c_all, ratio);
      if (y.norm() > 2.0) c_far = std::max(c_far, ratio);
    }
    REQUIRE(std::isfinite(c_all));
    REQUIRE(c_far <= 1.5 * c_all);
  }
}

TEST_CASE("free Dirac finite differences") {
  const SpatialGrid g = build_grid(GridScheme::UniformTensor, 16, 6.0);

  SECTION("matches the analytic derivative of a smooth spinor at 4th order") {
    // f(x) = exp(-|x|^2/4) (1, 0.5, -0.3i, 0.2)^T
    Eigen::Vector4cd u;
    u << 1.0, 0.5, cdouble(0, -0.3), 0.2;
    const auto& A = dirac_matrices().alpha;
    auto worst_error = [&](int N) {
      const SpatialGrid gg = build_grid(GridScheme::UniformTensor, N, 6.0);
      SpinorField f(gg);
      for (std::size_t i = 0; i < gg.size(); ++i)
        f.values.segment<4>(4 * i) = std::exp(-gg.points[i].squaredNorm() / 4.0) * u;
      const CVec df = apply_free_dirac_fd(gg, f.values);
      double worst = 0.0;
      for (std::size_t i = 0; i < gg.size(); ++i) {
        const Vec3& x = gg.points[i];
        const double e = std::exp(-x.squaredNorm() / 4.0);
        Eigen::Vector4cd expected = Eigen::Vector4cd::Zero();
        for (int ax = 0; ax < 3; ++ax) expected += -iu * (-0.5 * x[ax] * e) * (A[ax] * u);
        worst = std::max(worst, (df.segment<4>(4 * i) - expected).cwiseAbs().maxCoeff());
      }
      return worst;
    };
    const double e16 = worst_error(16);
    const double e24 = worst_error(24);
    REQUIRE(e16 < 0.02);
    // 4th-order convergence: (16/24)^4 = 0.198, with slack for the one-sided closures
    REQUIRE(e24 < 0.35 * e16);
  }

  SECTION("Hermitian as a quadratic form on interior-supported fields") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nd;
    SpinorField f(g), h(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.points[i].cwiseAbs().maxCoeff() > g.box_radius - 2.5 * g.cell) continue;
      for (int c = 0; c < 4; ++c) {
        f.values[4 * i + c] = cdouble(nd(rng), nd(rng));
        h.values[4 * i + c] = cdouble(nd(rng), nd(rng));
      }
    }
    const CVec Df = apply_free_dirac_fd(g, f.values);
    const CVec Dh = apply_free_dirac_fd(g, h.values);
    const cdouble lhs = dot_weighted(g, h.values, Df);
    const cdouble rhs = dot_weighted(g, Dh, f.values);
    REQUIRE(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("pointwise factorization") {
  SECTION("zero matrix") {
    const auto f = factorize_pointwise(Mat4::Zero());
    REQUIRE(f.v.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((f.U - Mat4::Identity()).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("already diagonal keeps positions") {
    Mat4 V = Mat4::Zero();
    V.diagonal() << 4.0, -1.0, 0.0, 0.0;
    const auto f = factorize_pointwise(V);
    Mat4 vexp = Mat4::Zero();
    vexp.diagonal() << 2.0, 1.0, 0.0, 0.0;
    Mat4 uexp = Mat4::Zero();
    uexp.diagonal() << 1.0, -1.0, 1.0, 1.0;
    REQUIRE((f.v - vexp).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((f.U - uexp).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("random Hermitian reconstruction, 1000 trials") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 1000; ++trial) {
      Mat4 A;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) A(i, j) = cdouble(nd(rng), nd(rng));
      const Mat4 V = 0.5 * (A + Mat4(A.adjoint()));
      const auto f = factorize_pointwise(V);
      REQUIRE((Mat4(f.v.adjoint()) * f.U * f.v - V).cwiseAbs().maxCoeff() <
              1e-10 * std::max(1.0, max_abs(V)));
      for (int i = 0; i < 4; ++i) REQUIRE(std::abs(std::abs(std::real(f.U(i, i))) - 1.0) < 1e-15);
    }
  }

  SECTION("positive scaling scales v by sqrt(g) and fixes U") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    Mat4 A;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) A(i, j) = cdouble(nd(rng), nd(rng));
    const Mat4 V = 0.5 * (A + Mat4(A.adjoint()));
    const double gscale = 3.7;
    const auto f1 = factorize_pointwise(V);
    const auto f2 = factorize_pointwise(Mat4(gscale * V));
    REQUIRE((f2.U - f1.U).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((f2.v - std::sqrt(gscale) * f1.v).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("non-Hermitian rejected") {
    Mat4 V = Mat4::Zero();
    V(0, 1) = 1.0;
    REQUIRE_THROWS_AS(factorize_pointwise(V), std::invalid_argument);
  }
}

TEST_CASE("potential families on a grid") {
  const SpatialGrid g = build_grid(GridScheme::UniformTensor, 6, 4.0);

  SECTION("zero family") {
    PotentialFamily fam;
    fam.kind = "zero";
    const FactorizedPotential pot = sample_potential(fam, g);
    REQUIRE(pot.is_zero());
    for (std::size_t i = 0; i < g.size(); ++i) {
      REQUIRE(pot.V[i].cwiseAbs().maxCoeff() == 0.0);
      REQUIRE((pot.U[i] - Mat4::Identity()).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SECTION("isotropic scalar: U = sign(g) I on the support") {
    for (double gsign : {1.0, -1.0}) {
      PotentialFamily fam;
      fam.kind = "isotropic-scalar";
      fam.delta = 4.0;
      fam.coupling = gsign * 2.5;
      const FactorizedPotential pot = sample_potential(fam, g);
      REQUIRE(pot.support.size() == g.size()); // polynomial envelope never underflows here
      for (auto i : pot.support)
        REQUIRE((pot.U[i] - gsign * Mat4::Identity()).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SECTION("attractive gaussian well: U = -I on the support") {
    PotentialFamily fam;
    fam.kind = "gaussian-well";
    fam.coupling = 5.0;
    const FactorizedPotential pot = sample_potential(fam, g);
    REQUIRE(!pot.support.empty());
    for (auto i : pot.support)
      REQUIRE((pot.U[i] + Mat4::Identity()).cwiseAbs().maxCoeff() == 0.0);
    // factorization identity exact after the support cut
    for (std::size_t i = 0; i < g.size(); ++i)
      REQUIRE((Mat4(pot.v[i].adjoint()) * pot.U[i] * pot.v[i] - pot.V[i]).cwiseAbs().maxCoeff() <
              1e-12);
  }

  SECTION("seeded random family is bitwise reproducible") {
    PotentialFamily fam;
    fam.kind = "random-hermitian";
    fam.delta = 5.0;
    fam.coupling = 1.3;
    fam.seed = 777;
    const FactorizedPotential a = sample_potential(fam, g);
    const FactorizedPotential b = sample_potential(fam, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      REQUIRE(std::memcmp(a.V[i].data(), b.V[i].data(), sizeof(Mat4)) == 0);
      REQUIRE(std::memcmp(a.v[i].data(), b.v[i].data(), sizeof(Mat4)) == 0);
      REQUIRE(std::memcmp(a.U[i].data(), b.U[i].data(), sizeof(Mat4)) == 0);
    }
  }

  SECTION("decay verification") {
    PotentialFamily zero;
    zero.kind = "zero";
    REQUIRE(verify_decay(sample_potential(zero, g), g, 4.0).constant == 0.0);

    PotentialFamily poly;
    poly.kind = "isotropic-scalar";
    poly.delta = 4.0;
    poly.coupling = 1.0;
    const auto chk = verify_decay(sample_potential(poly, g), g, 4.0);
    REQUIRE(chk.pass);
    REQUIRE(chk.constant == Catch::Approx(1.0).epsilon(1e-10));

    PotentialFamily gauss;
    gauss.kind = "gaussian-well";
    gauss.coupling = 2.0;
    const auto chk2 = verify_decay(sample_potential(gauss, g), g, 6.0);
    REQUIRE(chk2.pass);
    REQUIRE(std::isfinite(chk2.constant));
  }
}
