#ifndef DIRAC_DISPERSE_TYPES_HPP
#define DIRAC_DISPERSE_TYPES_HPP

#include <complex>
#include <Eigen/Dense>

namespace dirac {

using cdouble = std::complex<double>;
using Mat4 = Eigen::Matrix4cd;
using Vec3 = Eigen::Vector3d;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr cdouble iu{0.0, 1.0};

// Japanese bracket <x> = (1 + |x|^2)^{1/2}
inline double jbracket(const Vec3& x) { return std::sqrt(1.0 + x.squaredNorm()); }
inline double jbracket(double s) { return std::sqrt(1.0 + s * s); }

// max |entry| of a 4x4 block, the entrywise magnitude convention used for
// all kernel-size estimates
inline double max_abs(const Mat4& m) { return m.cwiseAbs().maxCoeff(); }

} // namespace dirac

#endif
