#pragma once

// Dynamic nodal admittance Y_N(s) and impedance Z_N(s) of the passive
// network in the global DQ frame. The slack (infinite) bus is an ideal
// voltage source, so its node is grounded and eliminated.

#include "emai/config.hpp"

#include <vector>

namespace emai {

/// Non-slack buses in document order; these are the 2x2 block rows of Z_N.
inline std::vector<int> port_buses(const SystemConfig& cfg) {
    std::vector<int> out;
    for (const auto& b : cfg.buses)
        if (b.kind != BusKind::slack) out.push_back(b.id);
    return out;
}

inline Mat2c branch_impedance(const BranchSpec& br, double omega_b, Complex s) {
    const Complex a = br.r + s * br.l / omega_b;
    Mat2c z;
    z << a, -br.l, br.l, a;
    return z;
}

inline Mat2c shunt_admittance(double c, double omega_b, Complex s) {
    return (s * c / omega_b) * Mat2c::Identity() + c * rotation_generator();
}

class NetworkImpedance {
public:
    explicit NetworkImpedance(const SystemConfig& cfg) : cfg_(cfg), ports_(port_buses(cfg)) {}

    const std::vector<int>& ports() const { return ports_; }
    Eigen::Index size() const { return 2 * static_cast<Eigen::Index>(ports_.size()); }

    /// Block index of a bus; -1 for the grounded slack bus.
    Eigen::Index block(int bus) const {
        for (std::size_t k = 0; k < ports_.size(); ++k)
            if (ports_[k] == bus) return static_cast<Eigen::Index>(k);
        return -1;
    }

    MatXc y_n(Complex s) const {
        const double wb = cfg_.omega_base();
        MatXc y = MatXc::Zero(size(), size());
        for (const auto& br : cfg_.branches) {
            const Mat2c yb = branch_impedance(br, wb, s).inverse();
            const Eigen::Index i = block(br.from), j = block(br.to);
            if (i >= 0) y.block<2, 2>(2 * i, 2 * i) += yb;
            if (j >= 0) y.block<2, 2>(2 * j, 2 * j) += yb;
            if (i >= 0 && j >= 0) {
                y.block<2, 2>(2 * i, 2 * j) -= yb;
                y.block<2, 2>(2 * j, 2 * i) -= yb;
            }
        }
        for (const auto& b : cfg_.buses) {
            const Eigen::Index k = block(b.id);
            if (k >= 0) y.block<2, 2>(2 * k, 2 * k) += shunt_admittance(cfg_.shunt_c(b), wb, s);
        }
        return y;
    }

    MatXc z_n(Complex s) const {
        const MatXc y = y_n(s);
        Eigen::FullPivLU<MatXc> lu(y);
        if (!lu.isInvertible()) {
            throw Error(ErrorKind::numeric, "network admittance singular at s = (" + std::to_string(s.real()) +
                                                ", " + std::to_string(s.imag()) + ")");
        }
        MatXc z = lu.inverse();
        const double rcond = 1.0 / (y.norm() * z.norm());
        if (rcond < 1e-14)
            throw Error(ErrorKind::numeric, "network admittance near-singular (rcond " + std::to_string(rcond) + ")");
        return z;
    }

    MatXc operator()(Complex s) const { return z_n(s); }

private:
    SystemConfig cfg_;
    std::vector<int> ports_;
};

inline NetworkImpedance network_impedance(const SystemConfig& cfg) { return NetworkImpedance(cfg); }

}  // namespace emai
