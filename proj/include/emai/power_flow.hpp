#pragma once

// Newton–Raphson AC power flow in polar form and the per-source
// steady-state quantities the small-signal models are linearized around.

#include "emai/config.hpp"

#include <cmath>
#include <vector>

namespace emai {

struct BusState {
    int id = 0;
    double v_mag = 1.0;
    double theta0 = 0.0;  // rad, relative to the slack bus
    Complex voltage() const { return std::polar(v_mag, theta0); }
};

/// Steady state of one grid-following inverter. Currents are positive
/// flowing out of the inverter into the network, in the PLL-aligned frame.
struct GflOperatingPoint {
    int bus = 0;
    double u_m = 1.0;
    double p_m = 0.0;
    double q_m = 0.0;
    double theta0 = 0.0;
    double u_d0 = 1.0;
    double u_q0 = 0.0;
    double i_d0 = 0.0;
    double i_q0 = 0.0;
    // Inverter-side (behind the filter) voltage; always filled, used by the DC loop.
    double u_id0 = 1.0;
    double u_iq0 = 0.0;
    std::optional<double> u_dc0;
};

struct OperatingPoint {
    std::vector<BusState> buses;  // same order as SystemConfig::buses
    std::vector<Complex> injection;  // solved complex injection per bus (generation positive)
    double mismatch_norm = 0.0;
    int iterations = 0;

    const BusState& bus(int id) const {
        for (const auto& b : buses)
            if (b.id == id) return b;
        throw Error(ErrorKind::config, "operating point has no bus " + std::to_string(id));
    }
};

/// Bus admittance matrix at the system frequency: series branches plus
/// shunt capacitances (susceptance c at 1 p.u. frequency).
inline MatXc bus_admittance(const SystemConfig& cfg) {
    const auto n = static_cast<Eigen::Index>(cfg.buses.size());
    MatXc y = MatXc::Zero(n, n);
    for (const auto& br : cfg.branches) {
        const auto i = static_cast<Eigen::Index>(cfg.bus_index(br.from));
        const auto j = static_cast<Eigen::Index>(cfg.bus_index(br.to));
        const Complex yb = 1.0 / Complex(br.r, br.l);
        y(i, i) += yb;
        y(j, j) += yb;
        y(i, j) -= yb;
        y(j, i) -= yb;
    }
    for (std::size_t k = 0; k < cfg.buses.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        y(kk, kk) += Complex(0.0, cfg.shunt_c(cfg.buses[k]));
    }
    return y;
}

/// Complex power injected at every bus for the given voltages.
inline VecXc power_injections(const MatXc& ybus, const VecXc& v) {
    const VecXc current = ybus * v;
    return v.cwiseProduct(current.conjugate());
}

inline OperatingPoint solve_power_flow(const SystemConfig& cfg) {
    const auto& st = cfg.solver;
    const std::size_t n = cfg.buses.size();
    const MatXc ybus = bus_admittance(cfg);

    std::vector<Eigen::Index> pvpq, pq;
    for (std::size_t k = 0; k < n; ++k) {
        if (cfg.buses[k].kind != BusKind::slack) pvpq.push_back(static_cast<Eigen::Index>(k));
        if (cfg.buses[k].kind == BusKind::pq) pq.push_back(static_cast<Eigen::Index>(k));
    }
    const auto npvpq = static_cast<Eigen::Index>(pvpq.size());
    const auto npq = static_cast<Eigen::Index>(pq.size());

    // Flat start; slack and pv magnitudes at their set points.
    VecXd vm = VecXd::Ones(static_cast<Eigen::Index>(n));
    VecXd va = VecXd::Zero(static_cast<Eigen::Index>(n));
    VecXc s_spec(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
        const auto& b = cfg.buses[k];
        const auto kk = static_cast<Eigen::Index>(k);
        if (b.kind != BusKind::pq) vm(kk) = b.v_set;
        s_spec(kk) = Complex(b.p_inj, b.q_inj);
    }

    auto voltages = [&] {
        VecXc v(static_cast<Eigen::Index>(n));
        for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = std::polar(vm(k), va(k));
        return v;
    };
    auto mismatch = [&](const VecXc& v) {
        const VecXc ds = power_injections(ybus, v) - s_spec;
        VecXd f(npvpq + npq);
        for (Eigen::Index a = 0; a < npvpq; ++a) f(a) = ds(pvpq[a]).real();
        for (Eigen::Index a = 0; a < npq; ++a) f(npvpq + a) = ds(pq[a]).imag();
        return f;
    };

    OperatingPoint op;
    double step_norm = std::numeric_limits<double>::infinity();
    VecXc v = voltages();
    VecXd f = mismatch(v);
    double fnorm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
    int it = 0;
    while (!(fnorm < st.pf_tolerance && (step_norm < st.pf_step_tolerance || fnorm < 1e-13))) {
        if (it >= st.pf_max_iterations)
            throw Error(ErrorKind::power_flow, "power flow did not converge in " + std::to_string(it) +
                                                   " iterations; final mismatch " + std::to_string(fnorm) + " p.u.");
        const VecXc ibus = ybus * v;
        const VecXc vnorm = v.cwiseQuotient(vm.cast<Complex>());
        // dS/dVa and dS/dVm (complex), standard polar derivatives.
        const MatXc dva = Complex(0, 1) * v.asDiagonal() *
                          (MatXc(ibus.asDiagonal()) - ybus * v.asDiagonal()).conjugate();
        const MatXc dvm = v.asDiagonal() * (ybus * vnorm.asDiagonal()).conjugate() +
                          MatXc(ibus.conjugate().asDiagonal()) * vnorm.asDiagonal();
        MatXd jac(npvpq + npq, npvpq + npq);
        for (Eigen::Index a = 0; a < npvpq; ++a) {
            for (Eigen::Index b = 0; b < npvpq; ++b) jac(a, b) = dva(pvpq[a], pvpq[b]).real();
            for (Eigen::Index b = 0; b < npq; ++b) jac(a, npvpq + b) = dvm(pvpq[a], pq[b]).real();
        }
        for (Eigen::Index a = 0; a < npq; ++a) {
            for (Eigen::Index b = 0; b < npvpq; ++b) jac(npvpq + a, b) = dva(pq[a], pvpq[b]).imag();
            for (Eigen::Index b = 0; b < npq; ++b) jac(npvpq + a, npvpq + b) = dvm(pq[a], pq[b]).imag();
        }
        Eigen::FullPivLU<MatXd> lu(jac);
        if (!lu.isInvertible())
            throw Error(ErrorKind::power_flow, "singular power-flow Jacobian at iteration " + std::to_string(it));
        const VecXd dx = -lu.solve(f);
        for (Eigen::Index a = 0; a < npvpq; ++a) va(pvpq[a]) += dx(a);
        for (Eigen::Index a = 0; a < npq; ++a) vm(pq[a]) += dx(npvpq + a);
        step_norm = dx.lpNorm<Eigen::Infinity>();
        v = voltages();
        f = mismatch(v);
        fnorm = f.lpNorm<Eigen::Infinity>();
        ++it;
        if (!std::isfinite(fnorm)) throw Error(ErrorKind::power_flow, "power flow diverged (non-finite mismatch)");
    }

    // Report angles relative to the slack bus.
    const auto slack = static_cast<Eigen::Index>(cfg.slack_index());
    const double ref = va(slack);
    const VecXc s_calc = power_injections(ybus, v);
    for (std::size_t k = 0; k < n; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        BusState b;
        b.id = cfg.buses[k].id;
        b.v_mag = vm(kk);
        b.theta0 = (kk == slack) ? 0.0 : va(kk) - ref;
        op.buses.push_back(b);
        op.injection.push_back(s_calc(kk));
    }
    op.mismatch_norm = fnorm;
    op.iterations = it;
    return op;
}

/// Steady-state quantities of the GFL on `source.bus`. P_m and Q_m are the
/// solved bus injections (equal to the dispatch within the power-flow
/// tolerance), which makes the bus balance exact for the dynamic models.
inline GflOperatingPoint source_operating_point(const OperatingPoint& op, const SourceSpec& source,
                                                double min_voltage = 0.5) {
    if (source.kind != SourceKind::gfl)
        throw Error(ErrorKind::config, "bus " + std::to_string(source.bus) + " does not host a GFL");
    const BusState& bus = op.bus(source.bus);
    if (bus.v_mag < min_voltage)
        throw Error(ErrorKind::power_flow, "implausible equilibrium: GFL bus " + std::to_string(source.bus) +
                                               " voltage " + std::to_string(bus.v_mag) + " p.u. below floor " +
                                               std::to_string(min_voltage));
    std::size_t k = 0;
    while (op.buses[k].id != source.bus) ++k;
    GflOperatingPoint g;
    g.bus = source.bus;
    g.u_m = bus.v_mag;
    g.theta0 = bus.theta0;
    g.p_m = op.injection[k].real();
    g.q_m = op.injection[k].imag();
    g.u_d0 = g.u_m;
    g.u_q0 = 0.0;
    g.i_d0 = g.p_m / g.u_m;
    g.i_q0 = -g.q_m / g.u_m;
    // Inverter-side voltage: u + (r + l·J)·i in the local frame.
    const auto& p = source.gfl;
    g.u_id0 = g.u_d0 + p.r_f * g.i_d0 - p.l_f * g.i_q0;
    g.u_iq0 = g.u_q0 + p.r_f * g.i_q0 + p.l_f * g.i_d0;
    if (p.dvl) g.u_dc0 = p.dvl->u_dc_ref;
    return g;
}

}  // namespace emai
