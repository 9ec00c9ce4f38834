#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "dirac/algebra.hpp"

using namespace dirac;

namespace {

Mat4 alpha_or_beta(int j) {
  const auto& d = dirac_matrices();
  return j == 0 ? d.beta : d.alpha[j - 1];
}

} // namespace

TEST_CASE("explicit matrices match the chosen representation") {
  const auto& d = dirac_matrices();

  Mat4 beta_expected = Mat4::Zero();
  beta_expected.diagonal() << 1, 1, -1, -1;
  REQUIRE((d.beta - beta_expected).cwiseAbs().maxCoeff() == 0.0);

  // alpha_3 carries sigma_3 in the off-diagonal blocks
  REQUIRE(d.alpha[2](0, 2) == cdouble(1, 0));
  REQUIRE(d.alpha[2](1, 3) == cdouble(-1, 0));

  for (int j = 0; j < 4; ++j) {
    const Mat4 m = alpha_or_beta(j);
    REQUIRE((m - Mat4(m.adjoint())).cwiseAbs().maxCoeff() == 0.0);
    // entries restricted to {0, +-1, +-i}
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        const cdouble z = m(r, c);
        const bool ok = z == cdouble(0, 0) || z == cdouble(1, 0) || z == cdouble(-1, 0) ||
                        z == cdouble(0, 1) || z == cdouble(0, -1);
        REQUIRE(ok);
      }
  }
}

TEST_CASE("anticommutation relations hold exactly for all 16 pairs") {
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) {
      const Mat4 anti = alpha_or_beta(j) * alpha_or_beta(k) + alpha_or_beta(k) * alpha_or_beta(j);
      const Mat4 expected = (j == k) ? Mat4(2.0 * Mat4::Identity()) : Mat4(Mat4::Zero());
      REQUIRE((anti - expected).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("alpha_dot basics") {
  REQUIRE(alpha_dot(Vec3::Zero()).cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    Vec3 v(nd(rng), nd(rng), nd(rng));
    const Mat4 av = alpha_dot(v);
    REQUIRE((av - Mat4(av.adjoint())).cwiseAbs().maxCoeff() < 1e-14);
    const Mat4 sq = av * av;
    REQUIRE((sq - v.squaredNorm() * Mat4::Identity()).cwiseAbs().maxCoeff() <
            1e-12 * std::max(1.0, v.squaredNorm()));

    // real-linearity
    Vec3 w(nd(rng), nd(rng), nd(rng));
    const double a = nd(rng), b = nd(rng);
    const Mat4 lin = alpha_dot(a * v + b * w) - a * alpha_dot(v) - b * alpha_dot(w);
    REQUIRE(lin.cwiseAbs().maxCoeff() < 1e-14 * (1.0 + std::abs(a) + std::abs(b)));
  }

  // unit vector: (alpha.e)^2 = I
  const Vec3 e = Vec3(1, 2, 2).normalized();
  REQUIRE((alpha_dot(e) * alpha_dot(e) - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("massless symbol A(xi)") {
  REQUIRE(dirac_symbol(Vec3::Zero()).cwiseAbs().maxCoeff() == 0.0);

  // A((0,0,1)) is the xi_3 slice of the Fourier-side matrix
  const Mat4 a3 = dirac_symbol(Vec3(0, 0, 1));
  REQUIRE(a3(0, 2) == cdouble(1, 0));
  REQUIRE(a3(1, 3) == cdouble(-1, 0));
  REQUIRE(a3(2, 0) == cdouble(1, 0));
  REQUIRE(a3(3, 1) == cdouble(-1, 0));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    Vec3 xi(nd(rng), nd(rng), nd(rng));
    const Mat4 A = dirac_symbol(xi);
    const Mat4 gram = A.adjoint() * A;
    REQUIRE((gram - xi.squaredNorm() * Mat4::Identity()).cwiseAbs().maxCoeff() <
            1e-12 * std::max(1.0, xi.squaredNorm()));
  }

  // eigenvalues of A((3,4,0)) are {+5,+5,-5,-5}
  Eigen::SelfAdjointEigenSolver<Mat4> es(dirac_symbol(Vec3(3, 4, 0)));
  RVec ev = es.eigenvalues();
  REQUIRE(ev[0] == Catch::Approx(-5.0).margin(1e-12));
  REQUIRE(ev[1] == Catch::Approx(-5.0).margin(1e-12));
  REQUIRE(ev[2] == Catch::Approx(5.0).margin(1e-12));
  REQUIRE(ev[3] == Catch::Approx(5.0).margin(1e-12));
}

TEST_CASE("symbol propagator matches the dense matrix exponential") {
  REQUIRE((symbol_propagator(Vec3::Zero(), 2.7) - Mat4::Identity()).cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(19);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    Vec3 xi(nd(rng), nd(rng), nd(rng));
    const double t = nd(rng);
    const Mat4 direct = ((-iu * t) * dirac_symbol(xi)).exp();
    REQUIRE((symbol_propagator(xi, t) - direct).cwiseAbs().maxCoeff() < 1e-10);
  }

  // propagator is unitary per mode
  const Vec3 xi(0.3, -1.2, 0.9);
  const Mat4 P = symbol_propagator(xi, 1.7);
  REQUIRE((P.adjoint() * P - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-13);
}
