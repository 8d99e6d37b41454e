// emai: small-signal analysis of grids with grid-following inverters.
//
//   emai analyze CONFIG [--out DIR] [--modes-only] [--no-mass] [--strict] [--pade N]
//                       [--contour-points N] [--seed-file PATH] [--all-modes] [--svg]
//   emai sweep   CONFIG --bus B [--w-min W] [--w-max W] [--points N] [--out FILE]
//   emai retune  CONFIG --mode K --bus B --param P --delta D [--relative] [--recommend]
//
// Exit codes: 0 ok, 1 config, 2 power flow, 3 mode finding, 4 oracle or
// data-quality disagreement, 5 internal numeric failure.

#include "emai/report.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>

namespace {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

Level log_level() {
    const char* env = std::getenv("EMAI_LOG");
    if (!env) return Level::warn;
    const std::string v(env);
    if (v == "error") return Level::error;
    if (v == "info") return Level::info;
    if (v == "debug") return Level::debug;
    return Level::warn;
}

void log(Level l, const std::string& msg) {
    static const Level threshold = log_level();
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (l <= threshold) std::cerr << "emai[" << names[static_cast<int>(l)] << "] " << msg << '\n';
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw emai::Error(emai::ErrorKind::config, "cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Seed file: one mode per line as "real_hz imag_hz" (λ/2π), '#' starts a comment.
std::vector<emai::Complex> read_seeds(const std::string& path) {
    const std::string text = read_text(path);
    std::vector<emai::Complex> out;
    std::istringstream is(text);
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
        ++n;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        double re = 0, im = 0;
        if (!(ls >> re)) continue;
        if (!(ls >> im))
            throw emai::Error(emai::ErrorKind::config, "seed file '" + path + "' line " + std::to_string(n) +
                                                           ": expected 'real_hz imag_hz'");
        out.emplace_back(emai::kTwoPi * re, emai::kTwoPi * im);
    }
    return out;
}

std::string hz_pair(emai::Complex l) {
    std::ostringstream os;
    os << std::setprecision(6) << "2pi(" << l.real() / emai::kTwoPi << (l.imag() < 0 ? " - j" : " + j")
       << std::abs(l.imag()) / emai::kTwoPi << ")";
    return os.str();
}

int cmd_analyze(const std::string& path, const emai::AnalysisOptions& opt, const std::string& out_dir,
                bool strict, bool svg, const std::string& timestamp) {
    const std::string text = read_text(path);
    const emai::SystemConfig cfg = emai::load_config(text);
    log(Level::info, "loaded " + path + ": " + std::to_string(cfg.buses.size()) + " buses, " +
                         std::to_string(cfg.gfl_sources().size()) + " GFLs");
    const emai::AnalysisResult r = emai::analyze(cfg, opt);
    for (const auto& f : r.failures)
        log(Level::warn, "seed " + hz_pair(f.seed) + " failed: " + f.reason);
    for (const auto& n : r.notes) log(Level::info, n);
    const std::string report = emai::write_reports(r, {path, text, timestamp}, out_dir, {opt.modes_only, svg});
    std::size_t retained = 0;
    for (const auto& m : r.modes) retained += m.mode.retained ? 1 : 0;
    std::cout << "modes: " << r.modes.size() << " found, " << retained << " retained\n";
    for (const auto& m : r.modes) {
        if (!m.mode.retained) continue;
        std::cout << "  mode " << m.index << "  " << hz_pair(m.mode.lambda);
        if (m.emai) {
            std::vector<double> pr;
            for (const auto& p : m.emai->sources) pr.push_back(p.pr_m);
            std::cout << "  dominant GFL:";
            for (std::size_t k : emai::argmax_all(pr)) std::cout << ' ' << m.emai->sources[k].bus;
        }
        std::cout << '\n';
    }
    for (const auto& c : r.oracles) {
        std::ostringstream line;
        line << c.name << ": " << (c.skipped ? "skipped" : (c.pass() ? "ok" : "FAIL")) << " (" << c.value
             << " vs " << c.tolerance << ")";
        log(c.pass() ? Level::info : Level::warn, line.str());
    }
    std::cout << "report: " << out_dir << "/report.json (" << emai::report_hash(emai::Json::parse(report)) << ")\n";
    if (strict && !r.oracles_pass()) {
        log(Level::error, "oracle disagreement beyond tolerance");
        return static_cast<int>(emai::ErrorKind::oracle_disagreement);
    }
    return 0;
}

int cmd_sweep(const std::string& path, int bus, double w_min, double w_max, int points, const std::string& out) {
    const emai::SystemConfig cfg = emai::load_config_file(path);
    if (!cfg.gfl_at(bus)) throw emai::Error(emai::ErrorKind::config, "bus " + std::to_string(bus) + " hosts no GFL");
    if (!(w_min > 0) || !(w_max > w_min) || points < 1)
        throw emai::Error(emai::ErrorKind::config, "sweep grid needs 0 < w-min < w-max and points >= 1");
    const emai::OperatingPoint op = emai::solve_power_flow(cfg);
    const emai::WholeSystem ws(cfg, op);
    const emai::SourcePort& src = ws.source(bus);
    std::ostringstream os;
    os << "omega_rad_s";
    for (const char* name : {"y_full", "y_c", "y_cs", "y_s", "z_wm"})
        for (const char* e : {"11", "12", "21", "22"}) os << ',' << name << '_' << e << "_re," << name << '_' << e << "_im";
    os << '\n';
    for (double w : emai::log_grid(w_min, w_max, points)) {
        const emai::Complex s(0.0, w);
        const emai::AdmittanceParts p = src.model->parts(s);
        const emai::Mat2c mats[5] = {src.model->y_full(s), p.y_c, p.y_cs, p.y_s, ws.z_wm(s, bus)};
        os << emai::fmt(w);
        for (const auto& m : mats)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) os << ',' << emai::fmt(m(i, j).real()) << ',' << emai::fmt(m(i, j).imag());
        os << '\n';
    }
    if (out.empty() || out == "-") {
        std::cout << os.str();
    } else {
        emai::write_file(out, os.str());
        std::cout << "sweep: " << out << " (" << points << " points)\n";
    }
    return 0;
}

int cmd_retune(const std::string& path, int mode_index, int bus, const std::string& param_name, double delta,
               bool relative, bool recommend) {
    const emai::SystemConfig cfg = emai::load_config_file(path);
    const emai::Param param = emai::parse_param(param_name);
    emai::AnalysisOptions opt;
    opt.modes_only = true;
    const emai::AnalysisResult r = emai::analyze(cfg, opt);
    const emai::WholeSystem& ws = *r.ws;
    const emai::SourcePort& src = ws.source(bus);
    if (!emai::has_param(src.model->params(), param))
        throw emai::Error(emai::ErrorKind::config, "GFL on bus " + std::to_string(bus) + " has no parameter " + param_name);
    if (mode_index < 1 || mode_index > static_cast<int>(r.modes.size()))
        throw emai::Error(emai::ErrorKind::config, "unknown mode " + std::to_string(mode_index) + " (1.." +
                                                       std::to_string(r.modes.size()) + ")");
    const emai::Mode& target = r.modes[static_cast<std::size_t>(mode_index - 1)].mode;
    if (target.flagged) throw emai::Error(emai::ErrorKind::mode_finding, "mode " + std::to_string(mode_index) + " flagged: " + target.note);

    const emai::PpfRecord rec = emai::ppf(ws, target, bus, param);
    const double rho = emai::get_param(src.model->params(), param);
    double d = relative ? delta * rho : delta;
    if (recommend) d = (rec.ppf.real() > 0 ? -1.0 : 1.0) * std::abs(d);
    const emai::RetuneResult rt = emai::retune_experiment(ws, target, rec, d);

    std::cout << std::setprecision(8);
    std::cout << "parameter " << param_name << " on GFL " << bus << ": " << rho << " -> " << rho + d << '\n';
    std::cout << "PPF = " << rec.ppf.real() << (rec.ppf.imag() < 0 ? " - j" : " + j") << std::abs(rec.ppf.imag())
              << " rad/s per unit\n";
    std::cout << "mode " << mode_index << " before     " << hz_pair(rt.lambda) << '\n';
    std::cout << "mode " << mode_index << " predicted  " << hz_pair(rt.predicted) << '\n';
    std::cout << "mode " << mode_index << " recomputed " << hz_pair(rt.recomputed) << '\n';
    std::cout << "damping change " << (rt.recomputed.real() - rt.lambda.real()) / emai::kTwoPi << " Hz\n";
    std::cout << "prediction error " << rt.relative_gap << " of the predicted shift\n";

    const emai::WholeSystem tuned = ws.with_params(bus, emai::with_param(src.model->params(), param, rho + d));
    std::cout << "index,before,after,shift_rad_s\n";
    for (const auto& m : r.modes) {
        if (!m.mode.retained) continue;
        std::string after = "not re-rooted";
        double shift = std::numeric_limits<double>::quiet_NaN();
        try {
            const emai::Complex l = d == 0.0 ? m.mode.lambda : emai::reroot(tuned, m.mode.lambda);
            after = hz_pair(l);
            shift = std::abs(l - m.mode.lambda);
        } catch (const emai::Error& e) {
            log(Level::warn, "mode " + std::to_string(m.index) + ": " + e.what());
        }
        std::cout << m.index << ',' << hz_pair(m.mode.lambda) << ',' << after << ',' << shift << '\n';
    }
    if (d != 0.0 && rt.relative_gap > 0.5) {
        log(Level::error, "first-order prediction error exceeds 50% of the predicted shift");
        return static_cast<int>(emai::ErrorKind::oracle_disagreement);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Impedance-based modal analysis of grids with grid-following inverters"};
    app.require_subcommand(1);
    app.set_version_flag("--version", emai::kToolVersion);

    std::string config;
    emai::AnalysisOptions opt;
    int pade = -1, contour = -1;
    std::string seed_file, out_dir = "emai_out", timestamp;
    bool strict = false, svg = false;
    auto* analyze = app.add_subcommand("analyze", "full pipeline; writes report.json and CSV tables");
    analyze->add_option("config", config, "configuration document")->required();
    analyze->add_option("--out", out_dir, "output directory");
    analyze->add_flag("--modes-only", opt.modes_only, "skip participation and PPF tables");
    analyze->add_flag("--no-mass", opt.no_mass, "skip the state-space oracle (needs --seed-file)");
    analyze->add_flag("--strict", strict, "exit 4 when an oracle check exceeds its tolerance");
    analyze->add_flag("--all-modes", opt.all_modes, "participation for modes outside the retained band");
    analyze->add_flag("--svg", svg, "also write pole_map.svg and pr_bars.svg");
    analyze->add_option("--pade", pade, "Padé order of the control delay (0, 1, 2)");
    analyze->add_option("--contour-points", contour, "trapezoid points of the residue contour");
    analyze->add_option("--seed-file", seed_file, "extra seeds, one 'real_hz imag_hz' per line");
    analyze->add_option("--timestamp", timestamp, "fixed metadata timestamp");

    int bus = 0, points = 200;
    double w_min = 0.1, w_max = 1e4;
    std::string sweep_out;
    auto* sweep = app.add_subcommand("sweep", "CSV of admittance parts and Z_w blocks over jω");
    sweep->add_option("config", config, "configuration document")->required();
    sweep->add_option("--bus", bus, "GFL bus")->required();
    sweep->add_option("--w-min", w_min, "lowest ω (rad/s)");
    sweep->add_option("--w-max", w_max, "highest ω (rad/s)");
    sweep->add_option("--points", points, "log-spaced points");
    sweep->add_option("--out", sweep_out, "output CSV (default stdout)");

    int mode_index = 0;
    std::string param;
    double delta = 0.0;
    bool relative = false, recommend = false;
    auto* retune = app.add_subcommand("retune", "PPF prediction versus re-rooted mode after a gain change");
    retune->add_option("config", config, "configuration document")->required();
    retune->add_option("--mode", mode_index, "mode index from modes.csv")->required();
    retune->add_option("--bus", bus, "GFL bus")->required();
    retune->add_option("--param", param, "kp_ccl|ki_ccl|kp_pll|ki_pll|kp_dvl|ki_dvl")->required();
    retune->add_option("--delta", delta, "parameter change")->required();
    retune->add_flag("--relative", relative, "delta is a fraction of the current value");
    retune->add_flag("--recommend", recommend, "choose the sign that moves the mode left");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*analyze) {
            if (pade >= 0) opt.pade_order = pade;
            if (contour >= 0) opt.contour_points = contour;
            if (!seed_file.empty()) opt.seeds = read_seeds(seed_file);
            return cmd_analyze(config, opt, out_dir, strict, svg, timestamp);
        }
        if (*sweep) return cmd_sweep(config, bus, w_min, w_max, points, sweep_out);
        if (*retune) return cmd_retune(config, mode_index, bus, param, delta, relative, recommend);
    } catch (const emai::Error& e) {
        log(Level::error, e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        log(Level::error, std::string("internal: ") + e.what());
        return static_cast<int>(emai::ErrorKind::numeric);
    }
    return 0;
}
