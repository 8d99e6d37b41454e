#pragma once

// Mode location on d(s) = det(E + Z_N·Y) and contour residues of Z_w.

#include "emai/whole_system.hpp"

#include <algorithm>
#include <numbers>
#include <span>

namespace emai {

struct RootResult {
    Complex lambda;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;  // |last step| / (1 + |λ|)
};

/// Secant iteration on a scalar analytic function from one seed.
template <class F>
RootResult find_root(const F& f, Complex seed, double tol = 1e-8, int max_iterations = 50) {
    RootResult r;
    Complex x0 = seed;
    Complex x1 = seed + 1e-7 * (1.0 + std::abs(seed)) * Complex(1.0, 1.0);
    Complex f0 = f(x0), f1 = f(x1);
    double step = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iterations; ++it) {
        r.iterations = it;
        if (f1 == 0.0) {
            step = 0.0;
            break;
        }
        const Complex df = f1 - f0;
        if (df == 0.0 || !std::isfinite(std::abs(df))) break;
        const Complex x2 = x1 - f1 * (x1 - x0) / df;
        if (!std::isfinite(x2.real()) || !std::isfinite(x2.imag())) break;
        step = std::abs(x2 - x1);
        x0 = x1;
        f0 = f1;
        x1 = x2;
        if (step <= 1e-15 * (1.0 + std::abs(x1))) break;
        f1 = f(x1);
    }
    r.lambda = x1;
    r.residual = step / (1.0 + std::abs(x1));
    r.converged = r.residual < tol;
    return r;
}

struct ResidueResult {
    MatXc residue;         // full 2n x 2n residue of Z_w
    double radius = 0.0;
    double consistency = 0.0;  // max relative change at half and double radius
    bool ok = false;
};

/// (1/2πi)∮ F(s) ds on a circle, N-point trapezoid rule.
template <class F>
MatXc contour_residue(const F& fn, Complex center, double radius, int points) {
    MatXc acc;
    for (int k = 0; k < points; ++k) {
        const Complex e = std::polar(radius, 2.0 * std::numbers::pi * (k + 0.5) / points);
        const MatXc v = fn(center + e) * e;
        if (k == 0)
            acc = v;
        else
            acc += v;
    }
    return acc / static_cast<double>(points);
}

/// Contour radius: the configured fraction of (1+|λ|), shrunk to a quarter of
/// the distance to the nearest other known singularity.
inline double contour_radius(Complex lambda, std::span<const Complex> others, double factor) {
    double r = factor * (1.0 + std::abs(lambda));
    for (const Complex& o : others) {
        const double d = std::abs(o - lambda);
        if (d > 1e-9 * (1.0 + std::abs(lambda))) r = std::min(r, d / 4.0);
    }
    return r;
}

template <class F>
ResidueResult residue_with_check(const F& fn, Complex lambda, double radius, int points) {
    ResidueResult out;
    out.radius = radius;
    out.residue = contour_residue(fn, lambda, radius, points);
    const MatXc half = contour_residue(fn, lambda, 0.5 * radius, points);
    const MatXc twice = contour_residue(fn, lambda, 2.0 * radius, points);
    out.consistency = std::max(relative_frobenius_gap(half, out.residue), relative_frobenius_gap(twice, out.residue));
    out.ok = std::isfinite(out.consistency) && out.consistency < 1e-6;
    return out;
}

inline ResidueResult residue(const WholeSystem& ws, Complex lambda, std::span<const Complex> others) {
    const auto& st = ws.config().solver;
    const double r = contour_radius(lambda, others, st.contour_radius_factor);
    return residue_with_check([&](Complex s) { return ws.z_w(s); }, lambda, r, st.contour_points);
}

/// Residue block of Z_wm at bus m.
inline Mat2c residue_block(const MatXc& full, Eigen::Index block) {
    return full.block<2, 2>(2 * block, 2 * block);
}

struct Mode {
    Complex lambda;
    double newton_residual = 0.0;
    int iterations = 0;
    Complex seed;
    bool retained = false;
    bool flagged = false;  // residue check failed; no participation
    std::string note;
    ResidueResult residue;
    std::map<int, Mat2c> residues;  // per source bus

    double frequency_hz() const { return lambda.imag() / kTwoPi; }
    double damping_hz() const { return lambda.real() / kTwoPi; }
};

struct SeedFailure {
    Complex seed;
    std::string reason;
};

struct ModeSearch {
    std::vector<Mode> modes;
    std::vector<SeedFailure> failures;
    std::vector<std::string> notes;
};

/// Frequency band of modes kept in participation summaries.
struct ModeBand {
    double min_hz = 0.5;
    double max_hz = 300.0;
    bool contains(Complex lambda) const {
        const double f = std::abs(lambda.imag()) / kTwoPi;
        return f >= min_hz && f <= max_hz;
    }
};

inline ModeBand mode_band(const WholeSystem& ws) {
    const auto& st = ws.config().solver;
    ModeBand b{st.min_mode_hz, st.max_mode_hz};
    if (const double t = ws.max_t_s(); t > 0) b.max_hz = std::min(b.max_hz, 0.5 / t);
    return b;
}

/// Upper-half-plane representative.
inline Complex fold(Complex z) { return z.imag() < 0 ? std::conj(z) : z; }

/// Refines seeds on d(s) = 0, folds conjugates, deduplicates, and computes
/// residues. `singularities` lists other known poles of Z_w (e.g. the full
/// state-space spectrum) used to size the residue contours.
inline ModeSearch find_modes(const WholeSystem& ws, std::span<const Complex> seeds,
                             std::span<const Complex> singularities = {}) {
    const auto& st = ws.config().solver;
    const ModeBand band = mode_band(ws);
    ModeSearch out;
    auto d = [&](Complex s) { return ws.det(s); };
    for (const Complex& seed0 : seeds) {
        const Complex seed = fold(seed0);
        RootResult r;
        try {
            r = find_root(d, seed, st.mode_tolerance, st.newton_max_iterations);
        } catch (const Error& e) {
            out.failures.push_back({seed, e.what()});
            continue;
        }
        if (!r.converged) {
            out.failures.push_back({seed, "no convergence in " + std::to_string(r.iterations) +
                                              " iterations (residual " + std::to_string(r.residual) + ")"});
            continue;
        }
        const Complex lam = fold(r.lambda);
        bool dup = false;
        for (const auto& m : out.modes)
            if (std::abs(m.lambda - lam) <= 1e-6 * (1.0 + std::abs(lam))) dup = true;
        if (dup) {
            out.notes.push_back("seed (" + std::to_string(seed.real()) + ", " + std::to_string(seed.imag()) +
                                ") collapsed onto an existing root");
            continue;
        }
        Mode m;
        m.lambda = lam;
        m.seed = seed;
        m.newton_residual = r.residual;
        m.iterations = r.iterations;
        m.retained = band.contains(lam);
        out.modes.push_back(std::move(m));
    }
    std::sort(out.modes.begin(), out.modes.end(), [](const Mode& a, const Mode& b) {
        if (a.lambda.imag() != b.lambda.imag()) return a.lambda.imag() < b.lambda.imag();
        return a.lambda.real() < b.lambda.real();
    });

    std::vector<Complex> known(singularities.begin(), singularities.end());
    for (const auto& m : out.modes) {
        known.push_back(m.lambda);
        known.push_back(std::conj(m.lambda));
    }
    for (auto& m : out.modes) {
        try {
            m.residue = residue(ws, m.lambda, known);
        } catch (const Error& e) {
            m.flagged = true;
            m.note = e.what();
            continue;
        }
        if (!m.residue.ok) {
            m.flagged = true;
            m.note = "residue radius check failed (" + std::to_string(m.residue.consistency) + ")";
            continue;
        }
        for (const auto& src : ws.sources()) m.residues[src.bus] = residue_block(m.residue.residue, src.block);
    }
    return out;
}

/// Re-roots one mode of a modified system starting from a known root.
inline Complex reroot(const WholeSystem& ws, Complex from) {
    const auto& st = ws.config().solver;
    const RootResult r = find_root([&](Complex s) { return ws.det(s); }, from, st.mode_tolerance,
                                   st.newton_max_iterations);
    if (!r.converged)
        throw Error(ErrorKind::mode_finding, "re-rooting from (" + std::to_string(from.real()) + ", " +
                                                 std::to_string(from.imag()) + ") did not converge");
    return r.lambda;
}

}  // namespace emai
