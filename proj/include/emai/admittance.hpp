#pragma once

// Analytic dq/DQ admittance of a grid-following inverter and its split into
// electromagnetic (CCL), coupling, and synchronization (PLL) parts.
//
// Sign convention: admittances relate the terminal voltage to the current
// flowing INTO the device (Δi_in = Y·Δu), which is what the closed loop
// Z_w = (E + Z_N·Y)^-1·Z_N requires. Operating-point currents are stored
// in the generator direction (out of the inverter), so the current
// coefficient matrix is built from i_in0 = -i_out0.

#include "emai/power_flow.hpp"
#include "emai/transfer.hpp"

#include <array>
#include <optional>
#include <string_view>

namespace emai {

/// Tunable control parameters a PPF can be taken with respect to.
enum class Param { kp_ccl, ki_ccl, kp_pll, ki_pll, kp_dvl, ki_dvl };

inline constexpr std::array<Param, 6> kAllParams = {Param::kp_ccl, Param::ki_ccl, Param::kp_pll,
                                                    Param::ki_pll, Param::kp_dvl, Param::ki_dvl};

inline std::string_view param_name(Param p) {
    switch (p) {
        case Param::kp_ccl: return "kp_ccl";
        case Param::ki_ccl: return "ki_ccl";
        case Param::kp_pll: return "kp_pll";
        case Param::ki_pll: return "ki_pll";
        case Param::kp_dvl: return "kp_dvl";
        case Param::ki_dvl: return "ki_dvl";
    }
    return "?";
}

inline Param parse_param(std::string_view name) {
    for (Param p : kAllParams)
        if (param_name(p) == name) return p;
    throw Error(ErrorKind::config, "unknown parameter '" + std::string(name) + "'");
}

inline bool has_param(const GflParams& g, Param p) {
    return (p != Param::kp_dvl && p != Param::ki_dvl) || g.dvl.has_value();
}

inline double get_param(const GflParams& g, Param p) {
    switch (p) {
        case Param::kp_ccl: return g.kp_ccl;
        case Param::ki_ccl: return g.ki_ccl;
        case Param::kp_pll: return g.kp_pll;
        case Param::ki_pll: return g.ki_pll;
        case Param::kp_dvl: return g.dvl ? g.dvl->kp_dvl : 0.0;
        case Param::ki_dvl: return g.dvl ? g.dvl->ki_dvl : 0.0;
    }
    return 0.0;
}

inline GflParams with_param(GflParams g, Param p, double value) {
    switch (p) {
        case Param::kp_ccl: g.kp_ccl = value; break;
        case Param::ki_ccl: g.ki_ccl = value; break;
        case Param::kp_pll: g.kp_pll = value; break;
        case Param::ki_pll: g.ki_pll = value; break;
        case Param::kp_dvl:
        case Param::ki_dvl:
            if (!g.dvl) throw Error(ErrorKind::config, "parameter " + std::string(param_name(p)) + " requires a DVL");
            (p == Param::kp_dvl ? g.dvl->kp_dvl : g.dvl->ki_dvl) = value;
            break;
    }
    return g;
}

/// Current-control loop seen as impedances: the PI acts as Z_mui in series
/// with the L filter (feedforward, virtual impedance and decoupling all zero).
struct CclImpedance {
    double r_f = 0.0;
    double l_f = 0.0;
    double kp_ccl = 0.0;
    double ki_ccl = 0.0;
    double omega_b = kTwoPi * 50.0;
    DelayKernel delay;

    Complex z_mui(Complex s) const { return (kp_ccl + ki_ccl / s) * delay(s); }

    /// Filter alone: (r + s·l/ω_b)·E + l·J.
    Mat2c z_filter(Complex s) const {
        const Complex a = r_f + s * l_f / omega_b;
        Mat2c z;
        z << a, -l_f, l_f, a;
        return z;
    }

    Mat2c z_mc(Complex s) const { return z_filter(s) + z_mui(s) * Mat2c::Identity(); }
};

/// d-axis equivalent branch created by the DC voltage loop.
///
/// DC link: c_dc·u_dc·du_dc/dt = P_dc − (e·i_out), DVL: i_ref,d = PI(u_dc − u_ref).
/// Linearized, Δi_ref,d = −H_dc·(u_id0·Δi_d + u_iq0·Δi_q + i_d0·Δu_id + i_q0·Δu_iq).
struct DvlEquivalentBranch {
    DvlParams params;
    double u_dc0 = 1.0;
    Eigen::Vector2d u_i0 = Eigen::Vector2d(1.0, 0.0);  // (u_id0, u_iq0)
    Eigen::Vector2d i_0 = Eigen::Vector2d::Zero();     // (i_d0, i_q0), out of the inverter

    Complex h_dc(Complex s) const {
        return (params.kp_dvl + params.ki_dvl / s) / (params.c_dc * s * u_dc0);
    }
    Complex dh_dc(Complex s, Param p) const {
        if (p == Param::kp_dvl) return 1.0 / (params.c_dc * s * u_dc0);
        if (p == Param::ki_dvl) return 1.0 / (params.c_dc * s * s * u_dc0);
        return 0.0;
    }

    /// Row multiplying Δi (per unit of H_dc·Z_mui): e0ᵀ + i0ᵀ·Z_f(s).
    Eigen::RowVector2cd current_row(const CclImpedance& ccl, Complex s) const {
        return u_i0.transpose().cast<Complex>() + i_0.transpose().cast<Complex>() * ccl.z_filter(s);
    }
    /// Series element Z_s (d-axis voltage per unit current).
    Eigen::RowVector2cd series_row(const CclImpedance& ccl, Complex s) const {
        return ccl.z_mui(s) * h_dc(s) * current_row(ccl, s);
    }
    /// Parallel element Y_p (d-axis voltage per unit terminal voltage).
    Eigen::RowVector2cd parallel_row(const CclImpedance& ccl, Complex s) const {
        return ccl.z_mui(s) * h_dc(s) * i_0.transpose().cast<Complex>();
    }
};

inline DvlEquivalentBranch dvl_correction(const DvlParams& params, const GflOperatingPoint& op) {
    const double u_dc0 = op.u_dc0.value_or(params.u_dc_ref);
    if (!(u_dc0 > 0)) throw Error(ErrorKind::config, "DC-link voltage must be positive");
    DvlEquivalentBranch b;
    b.params = params;
    b.u_dc0 = u_dc0;
    b.u_i0 = Eigen::Vector2d(op.u_id0, op.u_iq0);
    b.i_0 = Eigen::Vector2d(op.i_d0, op.i_q0);
    return b;
}

/// The three admittance parts at one s, global frame.
struct AdmittanceParts {
    Mat2c y_c;
    Mat2c y_cs;
    Mat2c y_s;
    Mat2c sum() const { return y_c + y_cs + y_s; }
};

/// Full analytic model of one GFL port.
class GflAdmittance {
public:
    GflAdmittance(const GflParams& params, const GflOperatingPoint& op, double omega_b,
                  DelayModel delay_model = DelayModel::pade, int pade_order = 2)
        : params_(params), op_(op), omega_b_(omega_b) {
        if (!(params.l_f > 0)) throw Error(ErrorKind::config, "l_f must be > 0");
        ccl_.r_f = params.r_f;
        ccl_.l_f = params.l_f;
        ccl_.kp_ccl = params.kp_ccl;
        ccl_.ki_ccl = params.ki_ccl;
        ccl_.omega_b = omega_b;
        ccl_.delay = DelayKernel{params.t_s, delay_model, pade_order};
        pll_ = PllTransfer{params.kp_pll, params.ki_pll};
        rotation_ = FrameRotation{op.theta0};
        if (params.dvl) dvl_ = dvl_correction(*params.dvl, op);
        k_u_ << 0.0, op.u_q0, 0.0, -op.u_d0;
        // From the device-inbound current i_in0 = -(i_d0, i_q0).
        k_i_ << 0.0, op.i_q0, 0.0, -op.i_d0;
    }

    const GflParams& params() const { return params_; }
    const GflOperatingPoint& op() const { return op_; }
    const CclImpedance& ccl() const { return ccl_; }
    const PllTransfer& pll() const { return pll_; }
    const FrameRotation& rotation() const { return rotation_; }
    const std::optional<DvlEquivalentBranch>& dvl() const { return dvl_; }
    double omega_b() const { return omega_b_; }
    const Mat2c& k_u() const { return k_u_; }
    const Mat2c& k_i() const { return k_i_; }
    int bus() const { return op_.bus; }

    /// Electromagnetic-dynamic admittance Y_mc^dq (local frame, PLL frozen), DVL folded in.
    Mat2c y_mc(Complex s) const {
        const Mat2c z = ccl_.z_mc(s);
        if (!dvl_) return invert(z, s);
        return invert(dvl_m(s), s) * dvl_n(s);
    }

    Complex u_pll(Complex s) const { return op_.u_d0 + s * s / (params_.ki_pll + s * params_.kp_pll); }
    Complex inv_u_pll(Complex s) const {
        const Complex den = params_.ki_pll + s * params_.kp_pll;
        return den / (op_.u_d0 * den + s * s);
    }

    /// Closed form T·(Y_mc + I0·H)·(E + U0·H)^-1·T^-1, no decomposition.
    Mat2c y_full(Complex s, bool freeze_pll = false) const {
        const Mat2c ymc = y_mc(s);
        if (freeze_pll) return rotation_.to_global(ymc);
        const Eigen::RowVector2cd h = pll_.row(s);
        const Eigen::Vector2cd u0(-op_.u_q0, op_.u_d0);
        const Eigen::Vector2cd i0(op_.i_q0, -op_.i_d0);  // J·i_in0
        const Mat2c lhs = ymc + i0 * h;
        const Mat2c rhs = Mat2c::Identity() + u0 * h;
        const Complex pole = 1.0 + (h * u0)(0);
        if (pole == 0.0) throw Error(ErrorKind::numeric, "PLL closed-loop pole at the evaluation point");
        return rotation_.to_global(lhs * rhs.inverse());
    }

    AdmittanceParts parts(Complex s) const {
        const Mat2c ymc = y_mc(s);
        const Complex g = inv_u_pll(s);
        return {rotation_.to_global(ymc), rotation_.to_global(ymc * k_u_ * g), rotation_.to_global(k_i_ * g)};
    }

    /// Analytic ∂Y^DQ/∂ρ at s; zero for a parameter the device does not have.
    Mat2c dy_dparam(Complex s, Param p) const {
        if (!has_param(params_, p)) return Mat2c::Zero();
        if (p == Param::kp_pll || p == Param::ki_pll) {
            const Complex den = params_.ki_pll + s * params_.kp_pll;
            const Complex up = u_pll(s);
            const Complex d_inv = (p == Param::kp_pll ? s * s * s : s * s) / (up * up * den * den);
            return d_inv * rotation_.to_global(y_mc(s) * k_u_ + k_i_);
        }
        const Mat2c dymc = dy_mc_dparam(s, p);
        return rotation_.to_global(dymc * (Mat2c::Identity() + k_u_ * inv_u_pll(s)));
    }

    /// Analytic ∂Y_mc^dq/∂ρ for CCL and DVL gains.
    Mat2c dy_mc_dparam(Complex s, Param p) const {
        const Complex g = ccl_.delay(s);
        Complex dz = 0.0;
        if (p == Param::kp_ccl) dz = g;
        if (p == Param::ki_ccl) dz = g / s;
        if (!dvl_) {
            const Mat2c y = y_mc(s);
            return -y * (dz * Mat2c::Identity()) * y;
        }
        const Eigen::Vector2cd e1(1.0, 0.0);
        const Complex z = ccl_.z_mui(s);
        const Complex h = dvl_->h_dc(s);
        const Complex dh = dvl_->dh_dc(s, p);
        const Eigen::RowVector2cd crow = dvl_->current_row(ccl_, s);
        const Eigen::RowVector2cd i0 = dvl_->i_0.transpose().cast<Complex>();
        // M = Z_mc + z·h·e1·crow, N = E + z·h·e1·i0ᵀ; Y = M^-1·N.
        const Complex dzh = dz * h + z * dh;
        const Mat2c dm = dz * Mat2c::Identity() + dzh * (e1 * crow);
        const Mat2c dn = dzh * (e1 * i0);
        const Mat2c minv = invert(dvl_m(s), s);
        return minv * (dn - dm * (minv * dvl_n(s)));
    }

private:
    Mat2c dvl_m(Complex s) const {
        const Eigen::Vector2cd e1(1.0, 0.0);
        return ccl_.z_mc(s) + ccl_.z_mui(s) * dvl_->h_dc(s) * (e1 * dvl_->current_row(ccl_, s));
    }
    Mat2c dvl_n(Complex s) const {
        const Eigen::Vector2cd e1(1.0, 0.0);
        return Mat2c::Identity() + e1 * dvl_->parallel_row(ccl_, s);
    }
    static Mat2c invert(const Mat2c& z, Complex s) {
        const Complex det = z.determinant();
        if (det == 0.0)
            throw Error(ErrorKind::numeric, "singular CCL impedance at s = (" + std::to_string(s.real()) + ", " +
                                                std::to_string(s.imag()) + ")");
        Mat2c inv;
        inv << z(1, 1), -z(0, 1), -z(1, 0), z(0, 0);
        return inv / det;
    }

    GflParams params_;
    GflOperatingPoint op_;
    double omega_b_;
    CclImpedance ccl_;
    PllTransfer pll_;
    FrameRotation rotation_;
    std::optional<DvlEquivalentBranch> dvl_;
    Mat2c k_u_;
    Mat2c k_i_;
};

/// Decomposed admittance with evaluable parts.
struct AdmittanceDecomposition {
    std::shared_ptr<const GflAdmittance> model;
    TransferMatrix2 y_full;
    TransferMatrix2 y_c;
    TransferMatrix2 y_cs;
    TransferMatrix2 y_s;
    Mat2c k_u;
    Mat2c k_i;
    Complex u_pll(Complex s) const { return model->u_pll(s); }
};

inline TransferMatrix2 ccl_admittance(const GflParams& params, const GflOperatingPoint& op, double omega_b,
                                      DelayModel delay_model = DelayModel::pade, int pade_order = 2) {
    auto m = std::make_shared<const GflAdmittance>(params, op, omega_b, delay_model, pade_order);
    return TransferMatrix2([m](Complex s) { return m->y_mc(s); }, Frame::local_dq, op.bus);
}

inline TransferMatrix2 full_admittance(const GflParams& params, const GflOperatingPoint& op, double omega_b,
                                       DelayModel delay_model = DelayModel::pade, int pade_order = 2,
                                       bool freeze_pll = false) {
    auto m = std::make_shared<const GflAdmittance>(params, op, omega_b, delay_model, pade_order);
    return TransferMatrix2([m, freeze_pll](Complex s) { return m->y_full(s, freeze_pll); }, Frame::global_dq,
                           op.bus);
}

inline AdmittanceDecomposition decompose_admittance(const GflParams& params, const GflOperatingPoint& op,
                                                    double omega_b, DelayModel delay_model = DelayModel::pade,
                                                    int pade_order = 2) {
    auto m = std::make_shared<const GflAdmittance>(params, op, omega_b, delay_model, pade_order);
    AdmittanceDecomposition d;
    d.model = m;
    d.y_full = TransferMatrix2([m](Complex s) { return m->y_full(s); }, Frame::global_dq, op.bus);
    d.y_c = TransferMatrix2([m](Complex s) { return m->parts(s).y_c; }, Frame::global_dq, op.bus);
    d.y_cs = TransferMatrix2([m](Complex s) { return m->parts(s).y_cs; }, Frame::global_dq, op.bus);
    d.y_s = TransferMatrix2([m](Complex s) { return m->parts(s).y_s; }, Frame::global_dq, op.bus);
    d.k_u = m->k_u();
    d.k_i = m->k_i();
    return d;
}

/// Checks (a + b·d^-1·c)^-1 = a^-1 − a^-1·b·(d + c·a^-1·b)^-1·c·a^-1.
inline bool matrix_inversion_lemma_check(const MatXc& a, const MatXc& b, const MatXc& c, const MatXc& d,
                                         double tol = 1e-12) {
    if (a.rows() != a.cols() || d.rows() != d.cols() || b.rows() != a.rows() || b.cols() != d.rows() ||
        c.rows() != d.rows() || c.cols() != a.cols())
        throw Error(ErrorKind::numeric, "matrix inversion lemma: non-conformable dimensions");
    Eigen::FullPivLU<MatXc> lu_a(a), lu_d(d);
    if (!lu_a.isInvertible() || !lu_d.isInvertible())
        throw Error(ErrorKind::numeric, "matrix inversion lemma: a and d must be invertible");
    const MatXc a_inv = lu_a.inverse();
    const MatXc inner = d + c * a_inv * b;
    Eigen::FullPivLU<MatXc> lu_inner(inner);
    if (!lu_inner.isInvertible()) throw Error(ErrorKind::numeric, "matrix inversion lemma: singular inner matrix");
    Eigen::FullPivLU<MatXc> lu_outer(a + b * lu_d.inverse() * c);
    if (!lu_outer.isInvertible()) throw Error(ErrorKind::numeric, "matrix inversion lemma: singular left side");
    const MatXc lhs = lu_outer.inverse();
    const MatXc rhs = a_inv - a_inv * b * lu_inner.inverse() * c * a_inv;
    return relative_frobenius_gap(lhs, rhs) <= tol;
}

}  // namespace emai
