#pragma once

// Report writers: report.json, modes.csv, participation.csv, ppf.csv and
// optional SVG figures. All numbers use the shortest round-trip form so
// files are byte-stable and re-parse to the exact in-memory values.

#include "emai/analysis.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <ctime>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace emai {

#ifndef EMAI_VERSION
#define EMAI_VERSION "0.1.0"
#endif

inline constexpr const char* kToolVersion = EMAI_VERSION;

using Json = nlohmann::ordered_json;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

/// Shortest decimal that parses back to exactly `v`.
inline std::string fmt(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw Error(ErrorKind::config, "not a number: '" + std::string(s) + "'");
    return v;
}

inline Json complex_json(Complex z) { return Json{{"re", z.real()}, {"im", z.imag()}}; }

inline std::string utc_timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline double damping_ratio(Complex lambda) {
    const double mag = std::abs(lambda);
    return mag > 0 ? -lambda.real() / mag : 0.0;
}

struct ReportInputs {
    std::string config_path;
    std::string config_text;
    std::string timestamp;  // empty: current UTC time
};

inline Json report_json(const AnalysisResult& r, const ReportInputs& in) {
    Json j;
    Json meta;
    meta["tool"] = "emai";
    meta["tool_version"] = kToolVersion;
    meta["config_path"] = in.config_path;
    meta["config_hash"] = "fnv1a64:" + hex64(fnv1a(in.config_text));
    meta["timestamp_utc"] = in.timestamp.empty() ? utc_timestamp() : in.timestamp;
    j["metadata"] = meta;

    j["units"] = Json{{"lambda_rad_s", "rad/s"},
                      {"frequency_hz", "Hz (imag(lambda)/2pi)"},
                      {"damping_hz", "Hz (real(lambda)/2pi)"},
                      {"damping_ratio", "1"},
                      {"pf_rad_s", "rad/s per unit admittance scaling"},
                      {"pr", "1"},
                      {"pf_mass", "1"},
                      {"ppf_rad_s_per_unit", "rad/s per unit parameter change"},
                      {"_pu", "per unit"},
                      {"_rad", "rad"}};

    const auto& st = r.config.solver;
    j["settings"] = Json{{"base_frequency_hz", r.config.base_frequency_hz},
                         {"delay_model", st.delay_model == DelayModel::exact ? "exact" : "pade"},
                         {"pade_order", st.pade_order},
                         {"contour_points", st.contour_points},
                         {"contour_radius_factor", st.contour_radius_factor},
                         {"mode_tolerance", st.mode_tolerance},
                         {"min_mode_hz", st.min_mode_hz},
                         {"max_mode_hz", mode_band(*r.ws).max_hz},
                         {"default_shunt_c_pu", st.default_shunt_c}};

    Json op;
    op["mismatch_norm_pu"] = r.op.mismatch_norm;
    op["iterations"] = r.op.iterations;
    Json buses = Json::array();
    for (std::size_t k = 0; k < r.op.buses.size(); ++k) {
        const auto& b = r.op.buses[k];
        buses.push_back(Json{{"id", b.id},
                             {"v_mag_pu", b.v_mag},
                             {"theta0_rad", b.theta0},
                             {"p_pu", r.op.injection[k].real()},
                             {"q_pu", r.op.injection[k].imag()}});
    }
    op["buses"] = buses;
    Json srcs = Json::array();
    for (const auto& g : r.sources) {
        Json s{{"bus", g.bus},      {"u_d0_pu", g.u_d0}, {"u_q0_pu", g.u_q0},   {"i_d0_pu", g.i_d0},
               {"i_q0_pu", g.i_q0}, {"p_m_pu", g.p_m},   {"q_m_pu", g.q_m},     {"theta0_rad", g.theta0},
               {"u_id0_pu", g.u_id0}, {"u_iq0_pu", g.u_iq0}};
        if (g.u_dc0) s["u_dc0_pu"] = *g.u_dc0;
        srcs.push_back(s);
    }
    op["sources"] = srcs;
    j["operating_point"] = op;

    Json modes = Json::array();
    for (const auto& m : r.modes) {
        Json jm;
        jm["index"] = m.index;
        jm["lambda_rad_s"] = complex_json(m.mode.lambda);
        jm["frequency_hz"] = m.mode.frequency_hz();
        jm["damping_hz"] = m.mode.damping_hz();
        jm["damping_ratio"] = damping_ratio(m.mode.lambda);
        jm["retained"] = m.mode.retained;
        jm["flagged"] = m.mode.flagged;
        jm["newton_residual"] = m.mode.newton_residual;
        jm["residue_consistency"] = m.mode.residue.consistency;
        if (r.eig) jm["mass_gap_rel"] = m.mass_gap;
        if (!m.mode.note.empty()) jm["note"] = m.mode.note;
        if (m.emai) {
            Json parts = Json::array();
            std::vector<double> pr_emai;
            for (std::size_t k = 0; k < m.emai->sources.size(); ++k) {
                const auto& p = m.emai->sources[k];
                pr_emai.push_back(p.pr_m);
                Json e{{"bus", p.bus},
                       {"pf_m_rad_s", complex_json(p.pf_m)},
                       {"pf_mc1_rad_s", complex_json(p.pf_mc1)},
                       {"pf_ms1_rad_s", complex_json(p.pf_ms1)},
                       {"pf_coupling_rad_s", complex_json(p.pf_coupling)},
                       {"pr_m", p.pr_m},
                       {"pr_mc1", p.pr_mc1},
                       {"pr_ms1", p.pr_ms1},
                       {"dominant_dynamic_emai", dominant_dynamic(p.pr_mc1, p.pr_ms1)}};
                if (m.mass) {
                    const auto& g = m.mass->sources[k];
                    e["pf_me2"] = complex_json(g.pf_me2);
                    e["pf_ms2"] = complex_json(g.pf_ms2);
                    e["pr_me2"] = m.mass->pr_me2[k];
                    e["pr_ms2"] = m.mass->pr_ms2[k];
                    e["dominant_dynamic_mass"] = dominant_dynamic(m.mass->pr_me2[k], m.mass->pr_ms2[k]);
                }
                parts.push_back(e);
            }
            jm["participation"] = parts;
            auto buses_of = [&](const std::vector<double>& v) {
                Json a = Json::array();
                for (std::size_t k : argmax_all(v)) a.push_back(m.emai->sources[k].bus);
                return a;
            };
            jm["dominant_source_emai"] = buses_of(pr_emai);
            if (m.mass) {
                jm["dominant_source_mass"] = buses_of(m.mass->pr_source());
                jm["network_pf_mass"] = complex_json(m.mass->network);
            }
        }
        if (!m.ppf.empty()) {
            Json pp = Json::array();
            for (const auto& p : m.ppf)
                pp.push_back(Json{{"bus", p.bus},
                                  {"parameter", param_name(p.parameter)},
                                  {"method", method_name(p.method)},
                                  {"value", p.value},
                                  {"ppf_rad_s_per_unit", complex_json(p.ppf)}});
            jm["ppf"] = pp;
        }
        modes.push_back(jm);
    }
    j["modes"] = modes;

    Json fails = Json::array();
    for (const auto& f : r.failures) fails.push_back(Json{{"seed_rad_s", complex_json(f.seed)}, {"reason", f.reason}});
    j["seed_failures"] = fails;
    j["notes"] = r.notes;

    Json oracles = Json::array();
    for (const auto& c : r.oracles) {
        Json o{{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"pass", c.pass()},
               {"skipped", c.skipped}};
        if (!c.note.empty()) o["note"] = c.note;
        oracles.push_back(o);
    }
    j["oracle_agreement"] = Json{{"all_pass", r.oracles_pass()}, {"checks", oracles}};
    return j;
}

/// FNV-1a of the serialized report with the timestamp blanked.
inline std::string report_hash(Json j) {
    j["metadata"]["timestamp_utc"] = "";
    return "fnv1a64:" + hex64(fnv1a(j.dump(2)));
}

inline std::string csv_bool(bool b) { return b ? "true" : "false"; }

inline std::string modes_csv(const AnalysisResult& r) {
    std::ostringstream os;
    os << "index,lambda_re_rad_s,lambda_im_rad_s,frequency_hz,damping_hz,damping_ratio,retained,flagged,"
          "newton_residual,mass_gap_rel\n";
    for (const auto& m : r.modes) {
        const Complex l = m.mode.lambda;
        os << m.index << ',' << fmt(l.real()) << ',' << fmt(l.imag()) << ',' << fmt(m.mode.frequency_hz()) << ','
           << fmt(m.mode.damping_hz()) << ',' << fmt(damping_ratio(l)) << ',' << csv_bool(m.mode.retained) << ','
           << csv_bool(m.mode.flagged) << ',' << fmt(m.mode.newton_residual) << ','
           << (r.eig ? fmt(m.mass_gap) : std::string()) << '\n';
    }
    return os.str();
}

inline std::string participation_csv(const AnalysisResult& r) {
    std::ostringstream os;
    os << "mode,bus,pf_m_re,pf_m_im,pf_mc1_re,pf_mc1_im,pf_ms1_re,pf_ms1_im,pf_coupling_re,pf_coupling_im,"
          "pr_m,pr_mc1,pr_ms1,pf_me2_re,pf_me2_im,pf_ms2_re,pf_ms2_im,pr_me2,pr_ms2\n";
    for (const auto& m : r.modes) {
        if (!m.emai) continue;
        for (std::size_t k = 0; k < m.emai->sources.size(); ++k) {
            const auto& p = m.emai->sources[k];
            os << m.index << ',' << p.bus;
            for (Complex z : {p.pf_m, p.pf_mc1, p.pf_ms1, p.pf_coupling}) os << ',' << fmt(z.real()) << ',' << fmt(z.imag());
            os << ',' << fmt(p.pr_m) << ',' << fmt(p.pr_mc1) << ',' << fmt(p.pr_ms1);
            if (m.mass) {
                const auto& g = m.mass->sources[k];
                os << ',' << fmt(g.pf_me2.real()) << ',' << fmt(g.pf_me2.imag()) << ',' << fmt(g.pf_ms2.real()) << ','
                   << fmt(g.pf_ms2.imag()) << ',' << fmt(m.mass->pr_me2[k]) << ',' << fmt(m.mass->pr_ms2[k]);
            } else {
                os << ",,,,,,";
            }
            os << '\n';
        }
    }
    return os.str();
}

inline std::string ppf_csv(const AnalysisResult& r) {
    std::ostringstream os;
    os << "mode,bus,parameter,method,value,ppf_re,ppf_im\n";
    for (const auto& m : r.modes)
        for (const auto& p : m.ppf)
            os << m.index << ',' << p.bus << ',' << param_name(p.parameter) << ',' << method_name(p.method) << ','
               << fmt(p.value) << ',' << fmt(p.ppf.real()) << ',' << fmt(p.ppf.imag()) << '\n';
    return os.str();
}

/// Minimal RFC-4180 reader for the files above (no quoted fields are emitted).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            row.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string svg_pole_map(const AnalysisResult& r) {
    const double w = 480, h = 360, pad = 40;
    double xmin = 0, xmax = 0, ymax = 1;
    for (const auto& m : r.modes) {
        xmin = std::min(xmin, m.mode.damping_hz());
        ymax = std::max(ymax, m.mode.frequency_hz());
    }
    xmin = std::min(xmin, -1.0);
    auto px = [&](double x) { return pad + (x - xmin) / (xmax - xmin) * (w - 2 * pad); };
    auto py = [&](double y) { return h - pad - y / ymax * (h - 2 * pad); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << py(0) << "\" x2=\"" << w - pad << "\" y2=\"" << py(0)
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << px(0) << "\" y1=\"" << pad << "\" x2=\"" << px(0) << "\" y2=\"" << h - pad
       << "\" stroke=\"black\"/>\n";
    for (const auto& m : r.modes) {
        os << "<circle cx=\"" << fmt(px(m.mode.damping_hz())) << "\" cy=\"" << fmt(py(m.mode.frequency_hz()))
           << "\" r=\"3\" fill=\"" << (m.mode.retained ? "crimson" : "gray") << "\"/>\n";
    }
    os << "<text x=\"" << w / 2 << "\" y=\"" << h - 8 << "\" text-anchor=\"middle\">real / 2pi (Hz)</text>\n";
    os << "<text x=\"12\" y=\"" << h / 2 << "\" transform=\"rotate(-90 12 " << h / 2
       << ")\" text-anchor=\"middle\">imag / 2pi (Hz)</text>\n";
    os << "</svg>\n";
    return os.str();
}

inline std::string svg_pr_bars(const AnalysisResult& r) {
    std::vector<const ModeAnalysis*> ms;
    for (const auto& m : r.modes)
        if (m.emai) ms.push_back(&m);
    const double bar = 8, gap = 24, h = 260, pad = 30;
    std::size_t nsrc = ms.empty() ? 0 : ms.front()->emai->sources.size();
    const double group = static_cast<double>(nsrc) * 3 * bar + gap;
    const double w = 2 * pad + group * static_cast<double>(ms.size());
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(std::max(w, 100.0)) << "\" height=\"" << h
       << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const char* colors[3] = {"steelblue", "darkorange", "seagreen"};
    for (std::size_t i = 0; i < ms.size(); ++i) {
        const auto& m = *ms[i];
        double x = pad + group * static_cast<double>(i);
        for (std::size_t k = 0; k < nsrc; ++k) {
            const auto& p = m.emai->sources[k];
            const double vals[3] = {p.pr_mc1, p.pr_ms1, m.mass ? m.mass->pr_me2[k] + m.mass->pr_ms2[k] : 0.0};
            for (int c = 0; c < 3; ++c) {
                const double bh = vals[c] * (h - 2 * pad);
                os << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(h - pad - bh) << "\" width=\"" << bar
                   << "\" height=\"" << fmt(bh) << "\" fill=\"" << colors[c] << "\"/>\n";
                x += bar;
            }
        }
        os << "<text x=\"" << fmt(pad + group * static_cast<double>(i)) << "\" y=\"" << h - 10 << "\">mode "
           << m.index << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::config, "cannot write '" + path.string() + "'");
    out << text;
}

struct WriteOptions {
    bool modes_only = false;
    bool svg = false;
};

/// Writes the report set into `dir`; returns the serialized report.json.
inline std::string write_reports(const AnalysisResult& r, const ReportInputs& in, const std::filesystem::path& dir,
                                 const WriteOptions& opt = {}) {
    std::filesystem::create_directories(dir);
    const Json j = report_json(r, in);
    const std::string text = j.dump(2) + "\n";
    write_file(dir / "report.json", text);
    write_file(dir / "modes.csv", modes_csv(r));
    if (!opt.modes_only) {
        write_file(dir / "participation.csv", participation_csv(r));
        write_file(dir / "ppf.csv", ppf_csv(r));
    }
    if (opt.svg) {
        write_file(dir / "pole_map.svg", svg_pole_map(r));
        if (!opt.modes_only) write_file(dir / "pr_bars.svg", svg_pr_bars(r));
    }
    return text;
}

}  // namespace emai
