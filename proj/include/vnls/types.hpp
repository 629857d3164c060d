#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace vnls {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;

inline constexpr Complex kI{0.0, 1.0};

struct SingularGram : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularCauchy : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularM : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegeneratePoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonDecaying : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DispersionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ExponentOverflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Reciprocal condition estimate from the singular values of a small dense matrix.
inline double rcond(const CMatrix& m) {
    Eigen::JacobiSVD<CMatrix> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0.0;
    return sv(sv.size() - 1) / sv(0);
}

}  // namespace vnls
