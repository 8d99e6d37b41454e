#pragma once

// Common numeric aliases and the error type shared by every module.

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace emai {

using Complex = std::complex<double>;
using Mat2c = Eigen::Matrix2cd;
using MatXc = Eigen::MatrixXcd;
using VecXc = Eigen::VectorXcd;
using MatXd = Eigen::MatrixXd;
using VecXd = Eigen::VectorXd;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Error classes; each maps onto one CLI exit code.
enum class ErrorKind {
    config = 1,
    power_flow = 2,
    mode_finding = 3,
    oracle_disagreement = 4,
    numeric = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

/// Rotation generator J = [[0, -1], [1, 0]]; J·x is the 90° rotation of x.
inline Mat2c rotation_generator() {
    Mat2c j;
    j << 0.0, -1.0, 1.0, 0.0;
    return j;
}

inline double relative_frobenius_gap(const MatXc& a, const MatXc& b) {
    const double scale = std::max(a.norm(), b.norm());
    if (scale == 0.0) return 0.0;
    return (a - b).norm() / scale;
}

inline double relative_gap(Complex a, Complex b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale == 0.0) return 0.0;
    return std::abs(a - b) / scale;
}

}  // namespace emai
