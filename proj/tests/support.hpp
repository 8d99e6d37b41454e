#pragma once

#include "emai/report.hpp"

#include <map>
#include <mutex>
#include <string>

namespace emai::test {

inline std::string fixture(const std::string& name) { return std::string(EMAI_FIXTURE_DIR) + "/" + name + ".toml"; }

inline const SystemConfig& fixture_config(const std::string& name) {
    static std::map<std::string, SystemConfig> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(name);
    if (it == cache.end()) it = cache.emplace(name, load_config_file(fixture(name))).first;
    return it->second;
}

inline const AnalysisResult& fixture_analysis(const std::string& name) {
    static std::map<std::string, AnalysisResult> cache;
    static std::mutex mu;
    const SystemConfig& cfg = fixture_config(name);
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(name);
    if (it == cache.end()) it = cache.emplace(name, analyze(cfg)).first;
    return it->second;
}

/// SMIB with the DC voltage loop of the reference parameter set.
inline const char* kSmibDvl = R"(
[system]
base_frequency_hz = 50.0

[[bus]]
id = 1
kind = "slack"
v_set = 1.0

[[bus]]
id = 2
kind = "pq"
p_inj = 0.8
q_inj = 0.1

[[branch]]
from = 1
to = 2
r = 0.02
l = 0.2

[[gfl]]
bus = 2
kp_ccl = 0.24
ki_ccl = 150.79
kp_pll = 31.42
ki_pll = 246.74
r_f = 0.01
l_f = 0.03
t_s = 1e-4

[gfl.dvl]
kp_dvl = 98.17
ki_dvl = 771.06
c_dc = 1.25
u_dc_ref = 2.5
)";

inline GflParams reference_params(bool high_gain_pll = false) {
    GflParams p;
    p.kp_ccl = 0.24;
    p.ki_ccl = 150.79;
    p.kp_pll = high_gain_pll ? 125.66 : 31.42;
    p.ki_pll = high_gain_pll ? 3947.84 : 246.74;
    p.r_f = 0.01;
    p.l_f = 0.03;
    return p;
}

inline DvlParams reference_dvl() { return DvlParams{98.17, 771.06, 1.25, 2.5}; }

/// Steady state of a loaded GFL at an arbitrary global angle.
inline GflOperatingPoint loaded_op(double u, double p, double q, double theta0, const GflParams& gp, int bus = 2) {
    GflOperatingPoint g;
    g.bus = bus;
    g.u_m = u;
    g.p_m = p;
    g.q_m = q;
    g.theta0 = theta0;
    g.u_d0 = u;
    g.u_q0 = 0.0;
    g.i_d0 = p / u;
    g.i_q0 = -q / u;
    g.u_id0 = g.u_d0 + gp.r_f * g.i_d0 - gp.l_f * g.i_q0;
    g.u_iq0 = g.u_q0 + gp.r_f * g.i_q0 + gp.l_f * g.i_d0;
    if (gp.dvl) g.u_dc0 = gp.dvl->u_dc_ref;
    return g;
}

inline std::vector<Complex> jw_grid(double lo, double hi, int n) {
    std::vector<Complex> out;
    for (double w : log_grid(lo, hi, n)) out.emplace_back(0.0, w);
    return out;
}

/// Index of the retained mode with the largest real part.
inline const ModeAnalysis& least_damped(const AnalysisResult& r) {
    const ModeAnalysis* best = nullptr;
    for (const auto& m : r.modes)
        if (m.mode.retained && (!best || m.mode.lambda.real() > best->mode.lambda.real())) best = &m;
    if (!best) throw Error(ErrorKind::mode_finding, "no retained mode");
    return *best;
}

}  // namespace emai::test
