#pragma once

// Evaluable 2x2 transfer matrices and the small building blocks that feed
// them: frame rotation, PLL transfer, control delay kernels.

#include "emai/config.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace emai {

enum class Frame { local_dq, global_dq };

/// s (rad/s) -> 2x2 complex matrix. Immutable; every call re-evaluates.
class TransferMatrix2 {
public:
    using Fn = std::function<Mat2c(Complex)>;

    TransferMatrix2() = default;
    TransferMatrix2(Fn fn, Frame frame, int bus) : fn_(std::move(fn)), frame_(frame), bus_(bus) {}

    Mat2c operator()(Complex s) const { return fn_(s); }
    Frame frame() const { return frame_; }
    int bus() const { return bus_; }

    friend TransferMatrix2 operator+(const TransferMatrix2& a, const TransferMatrix2& b) {
        return TransferMatrix2([a, b](Complex s) -> Mat2c { return a(s) + b(s); }, a.frame_, a.bus_);
    }

private:
    Fn fn_;
    Frame frame_ = Frame::global_dq;
    int bus_ = 0;
};

/// T(θ0) = [[cos, -sin], [sin, cos]]; maps local dq quantities to global DQ.
struct FrameRotation {
    double theta0 = 0.0;

    Mat2c matrix() const {
        Mat2c t;
        t << std::cos(theta0), -std::sin(theta0), std::sin(theta0), std::cos(theta0);
        return t;
    }
    Mat2c inverse() const { return matrix().transpose(); }
    Mat2c to_global(const Mat2c& local) const { return matrix() * local * inverse(); }
};

/// PLL small-signal transfer Δθ = H(s)·Δu_dq with H = ((s·kp + ki)/s²)·[0, 1].
struct PllTransfer {
    double kp_pll = 0.0;
    double ki_pll = 0.0;

    Complex scalar(Complex s) const { return (s * kp_pll + ki_pll) / (s * s); }
    Eigen::RowVector2cd row(Complex s) const { return Eigen::RowVector2cd(0.0, scalar(s)); }
};

/// Padé coefficients of e^{-x} in ascending powers of x.
struct PadeCoefficients {
    std::vector<double> num;
    std::vector<double> den;
};

inline PadeCoefficients pade_coefficients(int order) {
    switch (order) {
        case 0: return {{1.0}, {1.0}};
        case 1: return {{1.0, -0.5}, {1.0, 0.5}};
        case 2: return {{1.0, -0.5, 1.0 / 12.0}, {1.0, 0.5, 1.0 / 12.0}};
        default: throw Error(ErrorKind::config, "invalid Padé order " + std::to_string(order) + " (0, 1 or 2)");
    }
}

/// Control delay G_del(s) = e^{-1.5·T_s·s} or its Padé approximant.
struct DelayKernel {
    double t_s = 0.0;
    DelayModel model = DelayModel::pade;
    int pade_order = 2;

    double tau() const { return 1.5 * t_s; }

    Complex operator()(Complex s) const {
        if (t_s == 0.0) return 1.0;
        const Complex x = tau() * s;
        if (model == DelayModel::exact) return std::exp(-x);
        const PadeCoefficients c = pade_coefficients(pade_order);
        Complex num = 0.0, den = 0.0, xp = 1.0;
        for (std::size_t k = 0; k < c.num.size(); ++k, xp *= x) {
            num += c.num[k] * xp;
            den += c.den[k] * xp;
        }
        return num / den;
    }
};

}  // namespace emai
