#pragma once

// Eigenanalysis of a state-space model: bi-orthonormal eigenvectors,
// state participation matrix, ED/SD grouping per source and linear
// forced response to the infinite-bus disturbance port.

#include "emai/state_space.hpp"

#include <map>

namespace emai {

struct EigenDecomposition {
    VecXc lambda;
    MatXc phi;  // right eigenvectors (columns), unit 2-norm
    MatXc psi;  // left eigenvectors (rows), psi·phi = E
    MatXc p;    // p(k, i) = phi(k, i)·psi(i, k)
    double condition = 1.0;
    bool reliable = true;
};

namespace detail {

/// Diagonal power-of-two similarity D^-1·A·D that equalizes row and column
/// norms; returns the scaling vector d.
inline VecXd balance(MatXd& a) {
    const Eigen::Index n = a.rows();
    VecXd d = VecXd::Ones(n);
    constexpr double radix = 2.0;
    bool done = false;
    while (!done) {
        done = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            double c = 0.0, r = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix, f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= radix * radix;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                d(i) *= f;
                a.row(i) /= f;
                a.col(i) *= f;
            }
        }
    }
    return d;
}

}  // namespace detail

inline EigenDecomposition eigen_analysis(const MatXd& a) {
    if (a.rows() != a.cols()) throw Error(ErrorKind::numeric, "eigen_analysis: A must be square");
    EigenDecomposition e;
    const Eigen::Index n = a.rows();
    if (n == 0) return e;
    MatXd ab = a;
    const VecXd d = detail::balance(ab);
    Eigen::EigenSolver<MatXd> es(ab, true);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::numeric, "eigen_analysis: eigensolver failed");
    e.lambda = es.eigenvalues();
    // Undo the balancing: x = D·x_b.
    e.phi = d.cast<Complex>().asDiagonal() * es.eigenvectors();
    for (Eigen::Index i = 0; i < n; ++i) e.phi.col(i).normalize();
    const Eigen::JacobiSVD<MatXc> svd(e.phi);
    const VecXd sv = svd.singularValues();
    e.condition = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    e.reliable = e.condition < 1e12;
    e.psi = e.phi.partialPivLu().inverse();
    e.p = e.phi.cwiseProduct(e.psi.transpose());
    return e;
}

inline EigenDecomposition eigen_analysis(const StateSpaceModel& m) { return eigen_analysis(m.a); }

/// State groups of one GFL for one mode.
struct SourceGroups {
    int bus = 0;
    Complex pf_me2;  // filter currents, CCL integrators, DC-loop and delay states
    Complex pf_ms2;  // PLL angle and integrator
    bool has_dvl = false;
};

struct GroupedPf {
    std::vector<SourceGroups> sources;
    Complex network;  // network states (bus voltages, branch currents)
    // Normalized over sources with l = 2.
    std::vector<double> pr_me2;
    std::vector<double> pr_ms2;
    std::vector<double> pr_source() const {
        std::vector<double> out(pr_me2.size());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = pr_me2[k] + pr_ms2[k];
        return out;
    }
};

inline bool is_ed_state(StateName n) {
    switch (n) {
        case StateName::i_d:
        case StateName::i_q:
        case StateName::gamma_d:
        case StateName::gamma_q:
        case StateName::u_dc:
        case StateName::gamma_dc:
        case StateName::pade_k: return true;
        default: return false;
    }
}

inline bool is_sd_state(StateName n) { return n == StateName::theta || n == StateName::phi_pll; }

inline bool is_network_state(StateName n) {
    return n == StateName::line_iD || n == StateName::line_iQ || n == StateName::bus_vD || n == StateName::bus_vQ;
}

/// Groups column `mode` of the participation matrix by source and dynamic.
inline GroupedPf grouped_pf(const EigenDecomposition& eig, const StateSpaceModel& m, Eigen::Index mode) {
    if (static_cast<Eigen::Index>(m.states.size()) != eig.p.rows())
        throw Error(ErrorKind::numeric, "grouped_pf: unlabeled state encountered");
    GroupedPf g;
    std::map<int, std::size_t> slot;
    for (Eigen::Index k = 0; k < eig.p.rows(); ++k) {
        const StateLabel& l = m.states[static_cast<std::size_t>(k)];
        const Complex pk = eig.p(k, mode);
        if (is_network_state(l.name)) {
            g.network += pk;
            continue;
        }
        if (l.source_bus < 0) throw Error(ErrorKind::numeric, "grouped_pf: device state without a source");
        auto [it, inserted] = slot.try_emplace(l.source_bus, g.sources.size());
        if (inserted) g.sources.push_back({l.source_bus, 0.0, 0.0, false});
        SourceGroups& s = g.sources[it->second];
        if (is_ed_state(l.name)) {
            s.pf_me2 += pk;
            if (l.name == StateName::u_dc || l.name == StateName::gamma_dc) s.has_dvl = true;
        } else if (is_sd_state(l.name)) {
            s.pf_ms2 += pk;
        } else {
            throw Error(ErrorKind::numeric, "grouped_pf: state '" + std::string(state_name(l.name)) +
                                                "' has no group");
        }
    }
    double den = 0.0;
    for (const auto& s : g.sources) den += std::abs(s.pf_me2) + std::abs(s.pf_ms2);
    for (const auto& s : g.sources) {
        g.pr_me2.push_back(den > 0 ? std::abs(s.pf_me2) / den : 0.0);
        g.pr_ms2.push_back(den > 0 ? std::abs(s.pf_ms2) / den : 0.0);
    }
    return g;
}

struct GflResponse {
    int bus = 0;
    double voltage = 0.0;    // |Δu^DQ|, p.u.
    double current = 0.0;    // |Δi^DQ|, p.u.
    double frequency = 0.0;  // |Δω_pll|, rad/s
};

/// Steady-state sinusoid amplitudes for ΔU_D of the infinite bus = amplitude·cos(2π·f·t).
inline std::vector<GflResponse> forced_response(const StateSpaceModel& m, const EigenDecomposition& eig,
                                                double frequency_hz, double amplitude) {
    const Complex s(0.0, kTwoPi * frequency_hz);
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < eig.lambda.size(); ++i) gap = std::min(gap, std::abs(s - eig.lambda(i)));
    if (gap < 1e-9 * (1.0 + std::abs(s)))
        throw Error(ErrorKind::numeric, "forcing frequency within " + std::to_string(gap) + " rad/s of a pole");
    const MatXc h = m.frequency_response(s);
    const Eigen::Index in = m.input_index("slack_vD");
    std::vector<GflResponse> out;
    for (std::size_t k = 0; k < m.outputs.size(); ++k) {
        const std::string& name = m.outputs[k];
        if (name.rfind("i_D:", 0) != 0) continue;
        const std::string bus = name.substr(4);
        GflResponse r;
        r.bus = std::stoi(bus);
        auto mag = [&](const std::string& a, const std::string& b) {
            const Complex x = h(m.output_index(a), in);
            const Complex y = b.empty() ? Complex(0.0) : h(m.output_index(b), in);
            return amplitude * std::sqrt(std::norm(x) + std::norm(y));
        };
        r.voltage = mag("v_D:" + bus, "v_Q:" + bus);
        r.current = mag("i_D:" + bus, "i_Q:" + bus);
        r.frequency = mag("omega:" + bus, "");
        out.push_back(r);
    }
    return out;
}

}  // namespace emai
