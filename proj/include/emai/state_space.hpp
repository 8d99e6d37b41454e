#pragma once

// Full state-space oracle. Devices and the network are written as nonlinear
// time-domain models; the linear A, B, C, D realization is obtained by
// complex-step differentiation at the power-flow equilibrium, so it shares
// no algebra with the analytic admittance formulas it is compared with.

#include "emai/power_flow.hpp"
#include "emai/transfer.hpp"

#include <span>
#include <string>
#include <vector>

namespace emai {

enum class StateName {
    i_d, i_q, gamma_d, gamma_q, theta, phi_pll, u_dc, gamma_dc, pade_k,
    line_iD, line_iQ, bus_vD, bus_vQ
};

inline std::string_view state_name(StateName n) {
    switch (n) {
        case StateName::i_d: return "i_d";
        case StateName::i_q: return "i_q";
        case StateName::gamma_d: return "gamma_d";
        case StateName::gamma_q: return "gamma_q";
        case StateName::theta: return "theta";
        case StateName::phi_pll: return "phi_pll";
        case StateName::u_dc: return "u_dc";
        case StateName::gamma_dc: return "gamma_dc";
        case StateName::pade_k: return "pade_k";
        case StateName::line_iD: return "line_iD";
        case StateName::line_iQ: return "line_iQ";
        case StateName::bus_vD: return "bus_vD";
        case StateName::bus_vQ: return "bus_vQ";
    }
    return "?";
}

struct StateLabel {
    std::string owner;    // "gfl:8", "branch:4-7", "bus:3"
    int source_bus = -1;  // GFL bus for device states, -1 for network states
    StateName name = StateName::i_d;
    int k = 0;            // index within repeated states (pade_k)
};

struct StateSpaceModel {
    MatXd a, b, c, d;
    std::vector<StateLabel> states;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    Eigen::Index n() const { return a.rows(); }

    /// C·(sE − A)^-1·B + D.
    MatXc frequency_response(Complex s) const {
        const MatXc m = s * MatXc::Identity(n(), n()) - a.cast<Complex>();
        Eigen::PartialPivLU<MatXc> lu(m);
        return c.cast<Complex>() * lu.solve(b.cast<Complex>()) + d.cast<Complex>();
    }

    /// Frequency response restricted to named input/output index sets.
    MatXc frequency_response(Complex s, std::span<const Eigen::Index> in, std::span<const Eigen::Index> out) const {
        const MatXc full = frequency_response(s);
        MatXc sub(static_cast<Eigen::Index>(out.size()), static_cast<Eigen::Index>(in.size()));
        for (std::size_t i = 0; i < out.size(); ++i)
            for (std::size_t j = 0; j < in.size(); ++j)
                sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = full(out[i], in[j]);
        return sub;
    }

    Eigen::Index input_index(const std::string& name) const {
        for (std::size_t k = 0; k < inputs.size(); ++k)
            if (inputs[k] == name) return static_cast<Eigen::Index>(k);
        throw Error(ErrorKind::numeric, "state-space model has no input '" + name + "'");
    }
    Eigen::Index output_index(const std::string& name) const {
        for (std::size_t k = 0; k < outputs.size(); ++k)
            if (outputs[k] == name) return static_cast<Eigen::Index>(k);
        throw Error(ErrorKind::numeric, "state-space model has no output '" + name + "'");
    }
};

/// SISO controllable-canonical realization of e^{-τs}'s Padé approximant.
struct PadeRealization {
    MatXd a;
    VecXd b;
    Eigen::RowVectorXd c;
    double d = 1.0;
    int order() const { return static_cast<int>(a.rows()); }
};

inline PadeRealization pade_realization(double tau, int order) {
    const PadeCoefficients pc = pade_coefficients(order);
    PadeRealization r;
    const int n = order;
    r.a = MatXd::Zero(n, n);
    r.b = VecXd::Zero(n);
    r.c = Eigen::RowVectorXd::Zero(n);
    if (n == 0 || tau == 0.0) {
        r.a.resize(0, 0);
        r.b.resize(0);
        r.c.resize(0);
        return r;
    }
    // Polynomials in s: coefficient k carries τ^k.
    std::vector<double> num(n + 1), den(n + 1);
    for (int k = 0; k <= n; ++k) {
        num[k] = pc.num[k] * std::pow(tau, k);
        den[k] = pc.den[k] * std::pow(tau, k);
    }
    r.d = num[n] / den[n];
    for (int k = 0; k < n; ++k) {
        const double alpha = den[k] / den[n];
        const double beta = (num[k] - r.d * den[k]) / den[n];
        r.a(n - 1, k) = -alpha;
        r.c(k) = beta;
        if (k + 1 < n) r.a(k, k + 1) = 1.0;
    }
    r.b(n - 1) = 1.0;
    return r;
}

/// Nonlinear GFL model in its PLL-aligned frame. The L filter is written in
/// the local frame with the nominal-frequency cross coupling; the PLL enters
/// only through the frame rotation of the terminal voltage and current.
class GflDynamics {
public:
    GflDynamics(const GflParams& params, const GflOperatingPoint& op, double omega_b, int pade_order)
        : p_(params), op_(op), omega_b_(omega_b) {
        if (pade_order < 0 || pade_order > 2)
            throw Error(ErrorKind::config, "invalid Padé order " + std::to_string(pade_order));
        pade_ = pade_realization(1.5 * params.t_s, params.t_s > 0 ? pade_order : 0);
        n_ = 6 + (params.dvl ? 2 : 0) + 2 * pade_.order();
        p_dc_ = op.u_id0 * op.i_d0 + op.u_iq0 * op.i_q0;
    }

    int size() const { return n_; }
    int bus() const { return op_.bus; }
    const GflParams& params() const { return p_; }

    std::vector<StateLabel> labels() const {
        const std::string owner = "gfl:" + std::to_string(op_.bus);
        std::vector<StateLabel> out;
        auto add = [&](StateName n, int k = 0) { out.push_back({owner, op_.bus, n, k}); };
        add(StateName::i_d);
        add(StateName::i_q);
        add(StateName::gamma_d);
        add(StateName::gamma_q);
        add(StateName::theta);
        add(StateName::phi_pll);
        if (p_.dvl) {
            add(StateName::u_dc);
            add(StateName::gamma_dc);
        }
        for (int k = 0; k < 2 * pade_.order(); ++k) add(StateName::pade_k, k);
        return out;
    }

    std::vector<double> equilibrium() const {
        std::vector<double> x(static_cast<std::size_t>(n_), 0.0);
        x[0] = op_.i_d0;
        x[1] = op_.i_q0;
        x[2] = op_.u_id0;
        x[3] = op_.u_iq0;
        x[4] = op_.theta0;
        x[5] = 0.0;
        std::size_t at = 6;
        if (p_.dvl) {
            x[at++] = p_.dvl->u_dc_ref;
            x[at++] = op_.i_d0;
        }
        if (pade_.order() > 0) {
            // Steady state of ẋ = A·x + B·v: x = −A^-1·B·v.
            const VecXd unit = -pade_.a.partialPivLu().solve(pade_.b);
            for (double v : {op_.u_id0, op_.u_iq0})
                for (int k = 0; k < pade_.order(); ++k) x[at++] = unit(k) * v;
        }
        return x;
    }

    /// Time derivative of the device states and the injected current
    /// (global frame) plus PLL frequency deviation.
    template <class T>
    void evaluate(const T* x, T u_D, T u_Q, T* dx, T* i_out_D, T* i_out_Q, T* omega_pll) const {
        using std::cos;
        using std::sin;
        const T c = cos(x[4]), s = sin(x[4]);
        const T u_d = c * u_D + s * u_Q;
        const T u_q = -s * u_D + c * u_Q;
        const T i_d = x[0], i_q = x[1];

        T iref_d = T(op_.i_d0);
        const T iref_q = T(op_.i_q0);
        std::size_t at = 6;
        const T* dvl = nullptr;
        if (p_.dvl) {
            dvl = x + at;
            iref_d = p_.dvl->kp_dvl * (dvl[0] - p_.dvl->u_dc_ref) + dvl[1];
            at += 2;
        }
        const T err_d = iref_d - i_d, err_q = iref_q - i_q;
        const T v_d = p_.kp_ccl * err_d + x[2];
        const T v_q = p_.kp_ccl * err_q + x[3];

        T e_d = v_d, e_q = v_q;
        const int np = pade_.order();
        if (np > 0) {
            const T* xd = x + at;
            const T* xq = x + at + np;
            e_d = pade_.d * v_d;
            e_q = pade_.d * v_q;
            for (int k = 0; k < np; ++k) {
                e_d += pade_.c(k) * xd[k];
                e_q += pade_.c(k) * xq[k];
            }
            for (int r = 0; r < np; ++r) {
                T sd = pade_.b(r) * v_d, sq = pade_.b(r) * v_q;
                for (int k = 0; k < np; ++k) {
                    sd += pade_.a(r, k) * xd[k];
                    sq += pade_.a(r, k) * xq[k];
                }
                dx[at + r] = sd;
                dx[at + np + r] = sq;
            }
        }

        const double wl = omega_b_ / p_.l_f;
        dx[0] = wl * (e_d - u_d - p_.r_f * i_d + p_.l_f * i_q);
        dx[1] = wl * (e_q - u_q - p_.r_f * i_q - p_.l_f * i_d);
        dx[2] = p_.ki_ccl * err_d;
        dx[3] = p_.ki_ccl * err_q;
        dx[4] = p_.kp_pll * u_q + x[5];
        dx[5] = p_.ki_pll * u_q;
        if (dvl) {
            const T p_ac = e_d * i_d + e_q * i_q;
            dx[6] = (p_dc_ - p_ac) / (p_.dvl->c_dc * dvl[0]);
            dx[7] = p_.dvl->ki_dvl * (dvl[0] - p_.dvl->u_dc_ref);
        }
        *i_out_D = c * i_d - s * i_q;
        *i_out_Q = s * i_d + c * i_q;
        *omega_pll = dx[4];
    }

private:
    GflParams p_;
    GflOperatingPoint op_;
    double omega_b_;
    PadeRealization pade_;
    int n_ = 0;
    double p_dc_ = 0.0;
};

namespace detail {

/// Complex-step Jacobian of f: R^n x R^m -> R^p at (x0, u0). `f` must be
/// analytic in its arguments; columns are exact to rounding.
template <class F>
void complex_step_jacobian(const F& f, const std::vector<double>& x0, const std::vector<double>& u0,
                           std::size_t n_out, MatXd& dfdx, MatXd& dfdu) {
    using C = std::complex<double>;
    constexpr double h = 1e-30;
    const auto n = x0.size(), m = u0.size();
    dfdx.resize(static_cast<Eigen::Index>(n_out), static_cast<Eigen::Index>(n));
    dfdu.resize(static_cast<Eigen::Index>(n_out), static_cast<Eigen::Index>(m));
    std::vector<C> x(x0.begin(), x0.end()), u(u0.begin(), u0.end()), y(n_out);
    for (std::size_t k = 0; k < n; ++k) {
        x[k] += C(0.0, h);
        f(x.data(), u.data(), y.data());
        for (std::size_t r = 0; r < n_out; ++r)
            dfdx(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = y[r].imag() / h;
        x[k] = x0[k];
    }
    for (std::size_t k = 0; k < m; ++k) {
        u[k] += C(0.0, h);
        f(x.data(), u.data(), y.data());
        for (std::size_t r = 0; r < n_out; ++r)
            dfdu(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = y[r].imag() / h;
        u[k] = u0[k];
    }
}

}  // namespace detail

/// Linearized single-device model: input global Δu^DQ, output injected Δi^DQ.
inline StateSpaceModel gfl_state_space(const GflParams& params, const GflOperatingPoint& op, double omega_b,
                                       int pade_order) {
    const GflDynamics dev(params, op, omega_b, pade_order);
    const auto n = static_cast<std::size_t>(dev.size());
    const std::vector<double> x0 = dev.equilibrium();
    const std::vector<double> u0 = {op.u_d0 * std::cos(op.theta0), op.u_d0 * std::sin(op.theta0)};
    // Stacked map (x, u) -> (dx, i_D, i_Q).
    auto f = [&](const Complex* x, const Complex* u, Complex* y) {
        Complex w;
        dev.evaluate(x, u[0], u[1], y, y + n, y + n + 1, &w);
    };
    MatXd jx, ju;
    detail::complex_step_jacobian(f, x0, u0, n + 2, jx, ju);
    StateSpaceModel m;
    const auto ni = static_cast<Eigen::Index>(n);
    m.a = jx.topRows(ni);
    m.b = ju.topRows(ni);
    m.c = jx.bottomRows(2);
    m.d = ju.bottomRows(2);
    m.states = dev.labels();
    m.inputs = {"u_D", "u_Q"};
    m.outputs = {"i_D", "i_Q"};
    return m;
}

/// Nonlinear whole-system model: bus capacitors, RL branches, GFL devices,
/// constant-current (global frame) injections at all other non-slack buses.
///
/// Inputs: slack voltage (D, Q), then an external current injection (D, Q)
/// at every non-slack bus. Outputs: non-slack bus voltages (D, Q), then per
/// GFL injected current (D, Q) and PLL frequency deviation.
class SystemDynamics {
public:
    SystemDynamics(const SystemConfig& cfg, const OperatingPoint& op, int pade_order) : cfg_(cfg), op_(op) {
        omega_b_ = cfg.omega_base();
        for (const auto& b : cfg.buses) {
            if (b.kind == BusKind::slack) continue;
            const double c = cfg.shunt_c(b);
            if (!(c > 0))
                throw Error(ErrorKind::config,
                            "bus " + std::to_string(b.id) + " has zero capacitance; bus voltages must be states");
            ports_.push_back(b.id);
            shunt_.push_back(c);
        }
        for (const auto* s : cfg.gfl_sources()) {
            const GflOperatingPoint g = source_operating_point(op, *s, cfg.solver.min_source_voltage);
            devices_.emplace_back(s->gfl, g, omega_b_, pade_order);
        }
        // Constant injections at non-GFL ports, fixed at the equilibrium current.
        for (std::size_t k = 0; k < ports_.size(); ++k) {
            const std::size_t bi = cfg.bus_index(ports_[k]);
            Complex i = 0.0;
            if (!cfg.gfl_at(ports_[k])) i = std::conj(op.injection[bi] / op.buses[bi].voltage());
            load_.push_back(i);
        }
        std::size_t at = 2 * ports_.size() + 2 * cfg.branches.size();
        for (const auto& d : devices_) {
            device_offset_.push_back(at);
            at += static_cast<std::size_t>(d.size());
        }
        n_ = at;
        const std::size_t slack = cfg.slack_index();
        slack_v_ = op.buses[slack].voltage();
    }

    std::size_t size() const { return n_; }
    std::size_t input_count() const { return 2 + 2 * ports_.size(); }
    std::size_t output_count() const { return 2 * ports_.size() + 3 * devices_.size(); }
    const std::vector<int>& ports() const { return ports_; }
    const std::vector<GflDynamics>& devices() const { return devices_; }

    std::vector<StateLabel> labels() const {
        std::vector<StateLabel> out;
        for (int id : ports_) {
            const std::string owner = "bus:" + std::to_string(id);
            out.push_back({owner, -1, StateName::bus_vD, 0});
            out.push_back({owner, -1, StateName::bus_vQ, 0});
        }
        for (const auto& br : cfg_.branches) {
            const std::string owner = "branch:" + std::to_string(br.from) + "-" + std::to_string(br.to);
            out.push_back({owner, -1, StateName::line_iD, 0});
            out.push_back({owner, -1, StateName::line_iQ, 0});
        }
        for (const auto& d : devices_) {
            auto l = d.labels();
            out.insert(out.end(), l.begin(), l.end());
        }
        return out;
    }

    std::vector<std::string> input_names() const {
        std::vector<std::string> out = {"slack_vD", "slack_vQ"};
        for (int id : ports_) {
            out.push_back("inj_D:" + std::to_string(id));
            out.push_back("inj_Q:" + std::to_string(id));
        }
        return out;
    }

    std::vector<std::string> output_names() const {
        std::vector<std::string> out;
        for (int id : ports_) {
            out.push_back("v_D:" + std::to_string(id));
            out.push_back("v_Q:" + std::to_string(id));
        }
        for (const auto& d : devices_) {
            const std::string b = std::to_string(d.bus());
            out.push_back("i_D:" + b);
            out.push_back("i_Q:" + b);
            out.push_back("omega:" + b);
        }
        return out;
    }

    std::vector<double> equilibrium_state() const {
        std::vector<double> x(n_, 0.0);
        for (std::size_t k = 0; k < ports_.size(); ++k) {
            const Complex v = op_.bus(ports_[k]).voltage();
            x[2 * k] = v.real();
            x[2 * k + 1] = v.imag();
        }
        const std::size_t off = 2 * ports_.size();
        for (std::size_t b = 0; b < cfg_.branches.size(); ++b) {
            const auto& br = cfg_.branches[b];
            const Complex i = (op_.bus(br.from).voltage() - op_.bus(br.to).voltage()) / Complex(br.r, br.l);
            x[off + 2 * b] = i.real();
            x[off + 2 * b + 1] = i.imag();
        }
        for (std::size_t d = 0; d < devices_.size(); ++d) {
            const auto xd = devices_[d].equilibrium();
            std::copy(xd.begin(), xd.end(), x.begin() + static_cast<std::ptrdiff_t>(device_offset_[d]));
        }
        return x;
    }

    std::vector<double> equilibrium_input() const {
        std::vector<double> u(input_count(), 0.0);
        u[0] = slack_v_.real();
        u[1] = slack_v_.imag();
        return u;
    }

    /// Writes ẋ (size n) followed by the outputs into `y`.
    template <class T>
    void evaluate(const T* x, const T* u, T* y) const {
        const std::size_t np = ports_.size();
        T* dx = y;
        T* out = y + n_;
        // Net current into each port node (excluding the capacitor).
        std::vector<T> inj(2 * np);
        for (std::size_t k = 0; k < np; ++k) {
            inj[2 * k] = T(load_[k].real()) + u[2 + 2 * k];
            inj[2 * k + 1] = T(load_[k].imag()) + u[3 + 2 * k];
        }
        auto voltage = [&](int bus, T& vd, T& vq) {
            const auto it = std::find(ports_.begin(), ports_.end(), bus);
            if (it == ports_.end()) {
                vd = u[0];
                vq = u[1];
            } else {
                const auto k = static_cast<std::size_t>(it - ports_.begin());
                vd = x[2 * k];
                vq = x[2 * k + 1];
            }
        };
        auto port = [&](int bus) -> long {
            const auto it = std::find(ports_.begin(), ports_.end(), bus);
            return it == ports_.end() ? -1 : static_cast<long>(it - ports_.begin());
        };
        const std::size_t off = 2 * np;
        for (std::size_t b = 0; b < cfg_.branches.size(); ++b) {
            const auto& br = cfg_.branches[b];
            T vfd, vfq, vtd, vtq;
            voltage(br.from, vfd, vfq);
            voltage(br.to, vtd, vtq);
            const T id = x[off + 2 * b], iq = x[off + 2 * b + 1];
            const double wl = omega_b_ / br.l;
            dx[off + 2 * b] = wl * (vfd - vtd - br.r * id + br.l * iq);
            dx[off + 2 * b + 1] = wl * (vfq - vtq - br.r * iq - br.l * id);
            if (long f = port(br.from); f >= 0) {
                inj[2 * f] -= id;
                inj[2 * f + 1] -= iq;
            }
            if (long t = port(br.to); t >= 0) {
                inj[2 * t] += id;
                inj[2 * t + 1] += iq;
            }
        }
        std::size_t oat = 2 * np;
        for (std::size_t d = 0; d < devices_.size(); ++d) {
            const auto& dev = devices_[d];
            const long k = port(dev.bus());
            const T* xd = x + device_offset_[d];
            T* dxd = dx + device_offset_[d];
            T iD, iQ, w;
            dev.evaluate(xd, x[2 * k], x[2 * k + 1], dxd, &iD, &iQ, &w);
            inj[2 * k] += iD;
            inj[2 * k + 1] += iQ;
            out[oat++] = iD;
            out[oat++] = iQ;
            out[oat++] = w;
        }
        for (std::size_t k = 0; k < np; ++k) {
            const double c = shunt_[k];
            const T vd = x[2 * k], vq = x[2 * k + 1];
            // (c/ω_b)·dv/dt = −c·J·v + i_net
            dx[2 * k] = omega_b_ / c * (c * vq + inj[2 * k]);
            dx[2 * k + 1] = omega_b_ / c * (-c * vd + inj[2 * k + 1]);
            out[2 * k] = vd;
            out[2 * k + 1] = vq;
        }
    }

    /// ẋ at (x, u) in double precision.
    std::vector<double> rhs(const std::vector<double>& x, const std::vector<double>& u) const {
        std::vector<double> y(n_ + output_count());
        evaluate(x.data(), u.data(), y.data());
        y.resize(n_);
        return y;
    }

private:
    SystemConfig cfg_;
    OperatingPoint op_;
    double omega_b_ = 0.0;
    std::vector<int> ports_;
    std::vector<double> shunt_;
    std::vector<Complex> load_;
    std::vector<GflDynamics> devices_;
    std::vector<std::size_t> device_offset_;
    std::size_t n_ = 0;
    Complex slack_v_;
};

/// Linearized whole system around the power-flow equilibrium.
inline StateSpaceModel assemble_system(const SystemConfig& cfg, const OperatingPoint& op, int pade_order) {
    const SystemDynamics sys(cfg, op, pade_order);
    const std::size_t n = sys.size();
    auto f = [&](const Complex* x, const Complex* u, Complex* y) { sys.evaluate(x, u, y); };
    MatXd jx, ju;
    detail::complex_step_jacobian(f, sys.equilibrium_state(), sys.equilibrium_input(), n + sys.output_count(), jx,
                                  ju);
    const auto ni = static_cast<Eigen::Index>(n);
    const auto no = static_cast<Eigen::Index>(sys.output_count());
    StateSpaceModel m;
    m.a = jx.topRows(ni);
    m.b = ju.topRows(ni);
    m.c = jx.bottomRows(no);
    m.d = ju.bottomRows(no);
    m.states = sys.labels();
    m.inputs = sys.input_names();
    m.outputs = sys.output_names();
    return m;
}

/// Isolated RL branch with both terminals held at fixed voltages.
inline StateSpaceModel rl_branch_state_space(const BranchSpec& br, double omega_b) {
    StateSpaceModel m;
    const double wl = omega_b / br.l;
    m.a.resize(2, 2);
    m.a << -wl * br.r, wl * br.l, -wl * br.l, -wl * br.r;
    m.b = wl * MatXd::Identity(2, 2);
    m.c = MatXd::Identity(2, 2);
    m.d = MatXd::Zero(2, 2);
    const std::string owner = "branch:" + std::to_string(br.from) + "-" + std::to_string(br.to);
    m.states = {{owner, -1, StateName::line_iD, 0}, {owner, -1, StateName::line_iQ, 0}};
    m.inputs = {"v_D", "v_Q"};
    m.outputs = {"i_D", "i_Q"};
    return m;
}

}  // namespace emai
