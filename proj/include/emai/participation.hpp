#pragma once

// Element-level (MAI) and loop-level (EMAI) participation factors, explicit
// parameter participation factors and the retune experiment.

#include "emai/modes.hpp"

namespace emai {

/// Σ conj(a)·b: conjugate-linear in the first slot.
inline Complex frobenius_inner(const Mat2c& a, const Mat2c& b) { return (a.conjugate().cwiseProduct(b)).sum(); }

/// ⟨−Res*, Y⟩ with Res* the conjugate transpose, i.e. −trace(Res·Y).
inline Complex pf_kernel(const Mat2c& res, const Mat2c& y) { return -(res * y).trace(); }

struct SourceParticipation {
    int bus = 0;
    Complex pf_m;
    Complex pf_mc1;
    Complex pf_ms1;
    Complex pf_coupling;
    double pr_m = 0.0;
    double pr_mc1 = 0.0;
    double pr_ms1 = 0.0;
};

struct ParticipationRecord {
    Complex lambda;
    std::vector<SourceParticipation> sources;
};

inline ParticipationRecord participation_factor(const WholeSystem& ws, const Mode& mode) {
    if (mode.flagged) throw Error(ErrorKind::mode_finding, "mode flagged: " + mode.note);
    ParticipationRecord rec;
    rec.lambda = mode.lambda;
    double den = 0.0;
    for (const auto& src : ws.sources()) {
        SourceParticipation p;
        p.bus = src.bus;
        p.pf_m = pf_kernel(mode.residues.at(src.bus), src.admittance(mode.lambda));
        den += std::abs(p.pf_m);
        rec.sources.push_back(p);
    }
    for (auto& p : rec.sources) p.pr_m = den > 0 ? std::abs(p.pf_m) / den : 0.0;
    return rec;
}

/// Adds the ED/SD split to a record produced by participation_factor.
inline void emai_split(const WholeSystem& ws, const Mode& mode, ParticipationRecord& rec) {
    double den = 0.0;
    for (auto& p : rec.sources) {
        const SourcePort& src = ws.source(p.bus);
        const AdmittanceParts parts = src.model->parts(mode.lambda);
        const Mat2c& res = mode.residues.at(p.bus);
        p.pf_mc1 = pf_kernel(res, parts.y_c + parts.y_cs);
        p.pf_ms1 = pf_kernel(res, parts.y_cs + parts.y_s);
        p.pf_coupling = pf_kernel(res, parts.y_cs);
        den += std::abs(p.pf_mc1) + std::abs(p.pf_ms1);
    }
    for (auto& p : rec.sources) {
        p.pr_mc1 = den > 0 ? std::abs(p.pf_mc1) / den : 0.0;
        p.pr_ms1 = den > 0 ? std::abs(p.pf_ms1) / den : 0.0;
    }
}

inline ParticipationRecord emai_participation(const WholeSystem& ws, const Mode& mode) {
    ParticipationRecord rec = participation_factor(ws, mode);
    emai_split(ws, mode, rec);
    return rec;
}

enum class PpfMethod { analytic, finite_difference };

inline std::string_view method_name(PpfMethod m) {
    return m == PpfMethod::analytic ? "analytic" : "finite_difference";
}

struct PpfRecord {
    int bus = 0;
    Param parameter = Param::kp_ccl;
    Complex ppf;
    PpfMethod method = PpfMethod::analytic;
    double value = 0.0;  // parameter value the PPF was taken at
};

/// Central-difference step for a parameter value.
inline double ppf_step(double rho) { return 1e-6 * std::max(1.0, std::abs(rho)); }

inline PpfRecord ppf(const WholeSystem& ws, const Mode& mode, int bus, Param parameter,
                     PpfMethod method = PpfMethod::analytic) {
    if (mode.flagged) throw Error(ErrorKind::mode_finding, "mode flagged: " + mode.note);
    const SourcePort& src = ws.source(bus);
    const GflParams& gp = src.model->params();
    PpfRecord r;
    r.bus = bus;
    r.parameter = parameter;
    r.method = method;
    r.value = get_param(gp, parameter);
    if (!has_param(gp, parameter)) return r;
    const Mat2c& res = mode.residues.at(bus);
    if (method == PpfMethod::analytic) {
        r.ppf = pf_kernel(res, src.model->dy_dparam(mode.lambda, parameter));
        return r;
    }
    const double h = ppf_step(r.value);
    const double omega_b = ws.config().omega_base();
    const GflAdmittance up(with_param(gp, parameter, r.value + h), src.model->op(), omega_b, ws.delay_model(),
                           ws.pade_order());
    const GflAdmittance dn(with_param(gp, parameter, r.value - h), src.model->op(), omega_b, ws.delay_model(),
                           ws.pade_order());
    const Mat2c dy = (up.y_full(mode.lambda) - dn.y_full(mode.lambda)) / (2.0 * h);
    r.ppf = pf_kernel(res, dy);
    return r;
}

struct RetuneResult {
    Complex lambda;
    Complex predicted;
    Complex recomputed;
    double relative_gap = 0.0;  // |predicted − recomputed| / |predicted − λ|
};

/// First-order prediction λ + PPF·Δρ versus full re-assembly and re-rooting.
inline RetuneResult retune_experiment(const WholeSystem& ws, const Mode& mode, const PpfRecord& rec, double delta) {
    RetuneResult r;
    r.lambda = mode.lambda;
    r.predicted = mode.lambda + rec.ppf * delta;
    if (delta == 0.0) {
        r.recomputed = mode.lambda;
        return r;
    }
    const GflParams& gp = ws.source(rec.bus).model->params();
    const WholeSystem tuned = ws.with_params(rec.bus, with_param(gp, rec.parameter, get_param(gp, rec.parameter) + delta));
    r.recomputed = reroot(tuned, r.predicted);
    const double shift = std::abs(r.predicted - r.lambda);
    r.relative_gap = shift > 0 ? std::abs(r.predicted - r.recomputed) / shift
                               : (r.recomputed == r.lambda ? 0.0 : std::numeric_limits<double>::infinity());
    return r;
}

/// Indices whose value is within 1e-12 of the maximum.
inline std::vector<std::size_t> argmax_all(const std::vector<double>& v) {
    std::vector<std::size_t> out;
    if (v.empty()) return out;
    const double m = *std::max_element(v.begin(), v.end());
    for (std::size_t k = 0; k < v.size(); ++k)
        if (m - v[k] <= 1e-12) out.push_back(k);
    return out;
}

/// "ED", "SD", or "ED=SD" from the summed loop ratios.
inline std::string dominant_dynamic(double ed, double sd) {
    if (std::abs(ed - sd) <= 1e-12) return "ED=SD";
    return ed > sd ? "ED" : "SD";
}

}  // namespace emai
