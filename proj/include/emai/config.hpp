#pragma once

// Declarative grid description and its TOML loader.
//
// Document layout:
//
//   [system]    base_frequency_hz, s_base
//   [[bus]]     id, kind (slack|pv|pq), v_set, p_inj, q_inj, shunt_c
//   [[branch]]  from, to, r, l
//   [[gfl]]     bus, kp_ccl, ki_ccl, kp_pll, ki_pll, r_f, l_f, t_s
//   [gfl.dvl]   kp_dvl, ki_dvl, c_dc, u_dc_ref          (optional, per gfl)
//   [solver]    see SolverSettings
//
// Everything is per-unit except base_frequency_hz (Hz) and t_s (seconds).
// The slack bus always hosts the infinite-bus source; it is not listed.

#include "emai/types.hpp"

#include <toml.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace emai {

enum class BusKind { slack, pv, pq };
enum class SourceKind { infinite_bus, gfl };

/// How the converter's 1.5·T_s control delay enters analytic admittances.
enum class DelayModel { exact, pade };

struct SolverSettings {
    double pf_tolerance = 1e-8;       // mismatch infinity norm, p.u.
    double pf_step_tolerance = 1e-10;
    int pf_max_iterations = 50;
    double default_shunt_c = 1e-4;    // applied to buses without shunt_c
    double min_source_voltage = 0.5;  // floor for plausible GFL equilibria
    double contour_radius_factor = 1e-3;
    int contour_points = 64;
    DelayModel delay_model = DelayModel::pade;
    int pade_order = 2;
    double default_t_s = 0.0;
    double mode_tolerance = 1e-8;
    int newton_max_iterations = 50;
    double min_mode_hz = 0.5;
    double max_mode_hz = 300.0;
};

struct BusSpec {
    int id = 0;
    BusKind kind = BusKind::pq;
    double v_set = 1.0;
    double p_inj = 0.0;
    double q_inj = 0.0;
    std::optional<double> shunt_c;  // unset: SolverSettings::default_shunt_c
};

struct BranchSpec {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double l = 0.0;
};

struct DvlParams {
    double kp_dvl = 0.0;
    double ki_dvl = 0.0;
    double c_dc = 1.0;
    double u_dc_ref = 1.0;
};

struct GflParams {
    double kp_ccl = 0.0;
    double ki_ccl = 0.0;
    double kp_pll = 0.0;
    double ki_pll = 0.0;
    double r_f = 0.0;
    double l_f = 0.0;
    double t_s = 0.0;
    std::optional<DvlParams> dvl;
};

struct SourceSpec {
    int bus = 0;
    SourceKind kind = SourceKind::gfl;
    GflParams gfl;  // meaningful for kind == gfl
};

struct SystemConfig {
    double base_frequency_hz = 50.0;
    double s_base = 100e6;
    std::vector<BusSpec> buses;
    std::vector<BranchSpec> branches;
    std::vector<SourceSpec> sources;
    SolverSettings solver;

    double omega_base() const { return kTwoPi * base_frequency_hz; }

    double shunt_c(const BusSpec& bus) const { return bus.shunt_c.value_or(solver.default_shunt_c); }

    std::size_t bus_index(int id) const {
        for (std::size_t k = 0; k < buses.size(); ++k)
            if (buses[k].id == id) return k;
        throw Error(ErrorKind::config, "unknown bus id " + std::to_string(id));
    }

    bool has_bus(int id) const {
        return std::any_of(buses.begin(), buses.end(), [id](const BusSpec& b) { return b.id == id; });
    }

    std::size_t slack_index() const {
        for (std::size_t k = 0; k < buses.size(); ++k)
            if (buses[k].kind == BusKind::slack) return k;
        throw Error(ErrorKind::config, "exactly one slack bus required, found 0");
    }

    /// GFL sources in document order.
    std::vector<const SourceSpec*> gfl_sources() const {
        std::vector<const SourceSpec*> out;
        for (const auto& s : sources)
            if (s.kind == SourceKind::gfl) out.push_back(&s);
        return out;
    }

    const SourceSpec* gfl_at(int bus) const {
        for (const auto& s : sources)
            if (s.kind == SourceKind::gfl && s.bus == bus) return &s;
        return nullptr;
    }
};

namespace detail {

inline void reject_unknown_keys(const toml::table& tbl, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (const auto& [key, node] : tbl) {
        const std::string k(key.str());
        if (!allowed.count(k)) throw Error(ErrorKind::config, "schema: unknown key '" + k + "' in " + where);
    }
}

inline double number(const toml::table& tbl, const std::string& key, const std::string& where) {
    const toml::node* node = tbl.get(key);
    if (!node) throw Error(ErrorKind::config, "schema: missing key '" + key + "' in " + where);
    if (auto v = node->value_exact<double>()) return *v;
    if (auto v = node->value_exact<int64_t>()) return static_cast<double>(*v);
    throw Error(ErrorKind::config, "schema: key '" + key + "' in " + where + " must be a number");
}

inline std::optional<double> optional_number(const toml::table& tbl, const std::string& key,
                                             const std::string& where) {
    if (!tbl.get(key)) return std::nullopt;
    return number(tbl, key, where);
}

inline int integer(const toml::table& tbl, const std::string& key, const std::string& where) {
    const toml::node* node = tbl.get(key);
    if (!node) throw Error(ErrorKind::config, "schema: missing key '" + key + "' in " + where);
    if (auto v = node->value_exact<int64_t>()) return static_cast<int>(*v);
    throw Error(ErrorKind::config, "schema: key '" + key + "' in " + where + " must be an integer");
}

inline std::string string(const toml::table& tbl, const std::string& key, const std::string& where) {
    const toml::node* node = tbl.get(key);
    if (!node) throw Error(ErrorKind::config, "schema: missing key '" + key + "' in " + where);
    if (auto v = node->value_exact<std::string>()) return *v;
    throw Error(ErrorKind::config, "schema: key '" + key + "' in " + where + " must be a string");
}

inline std::vector<const toml::table*> table_array(const toml::table& root, const std::string& key) {
    std::vector<const toml::table*> out;
    const toml::node* node = root.get(key);
    if (!node) return out;
    const toml::array* arr = node->as_array();
    if (!arr) throw Error(ErrorKind::config, "schema: '" + key + "' must be an array of tables ([[" + key + "]])");
    for (const auto& elem : *arr) {
        const toml::table* t = elem.as_table();
        if (!t) throw Error(ErrorKind::config, "schema: '" + key + "' entries must be tables");
        out.push_back(t);
    }
    return out;
}

inline const toml::table* subtable(const toml::table& root, const std::string& key) {
    const toml::node* node = root.get(key);
    if (!node) return nullptr;
    const toml::table* t = node->as_table();
    if (!t) throw Error(ErrorKind::config, "schema: '" + key + "' must be a table");
    return t;
}

inline SolverSettings parse_solver(const toml::table* tbl) {
    SolverSettings s;
    if (!tbl) return s;
    const std::string where = "[solver]";
    reject_unknown_keys(*tbl,
                        {"pf_tolerance", "pf_step_tolerance", "pf_max_iterations", "default_shunt_c",
                         "min_source_voltage", "contour_radius_factor", "contour_points", "delay_model",
                         "pade_order", "default_t_s", "mode_tolerance", "newton_max_iterations",
                         "min_mode_hz", "max_mode_hz"},
                        where);
    auto num = [&](const char* key, double& out) {
        if (auto v = optional_number(*tbl, key, where)) out = *v;
    };
    auto i32 = [&](const char* key, int& out) {
        if (tbl->get(key)) out = integer(*tbl, key, where);
    };
    num("pf_tolerance", s.pf_tolerance);
    num("pf_step_tolerance", s.pf_step_tolerance);
    i32("pf_max_iterations", s.pf_max_iterations);
    num("default_shunt_c", s.default_shunt_c);
    num("min_source_voltage", s.min_source_voltage);
    num("contour_radius_factor", s.contour_radius_factor);
    i32("contour_points", s.contour_points);
    i32("pade_order", s.pade_order);
    num("default_t_s", s.default_t_s);
    num("mode_tolerance", s.mode_tolerance);
    i32("newton_max_iterations", s.newton_max_iterations);
    num("min_mode_hz", s.min_mode_hz);
    num("max_mode_hz", s.max_mode_hz);
    if (tbl->get("delay_model")) {
        const std::string dm = string(*tbl, "delay_model", where);
        if (dm == "exact")
            s.delay_model = DelayModel::exact;
        else if (dm == "pade")
            s.delay_model = DelayModel::pade;
        else
            throw Error(ErrorKind::config, "schema: delay_model must be 'exact' or 'pade', got '" + dm + "'");
    }
    if (s.pade_order < 0 || s.pade_order > 2)
        throw Error(ErrorKind::config, "invariant: pade_order must be 0, 1 or 2");
    if (s.contour_points < 8) throw Error(ErrorKind::config, "invariant: contour_points must be >= 8");
    if (s.default_shunt_c < 0) throw Error(ErrorKind::config, "invariant: default_shunt_c must be >= 0");
    return s;
}

inline void check_connected(const SystemConfig& cfg) {
    if (cfg.buses.empty()) return;
    std::map<int, std::vector<int>> adj;
    for (const auto& br : cfg.branches) {
        adj[br.from].push_back(br.to);
        adj[br.to].push_back(br.from);
    }
    std::set<int> seen{cfg.buses.front().id};
    std::vector<int> stack{cfg.buses.front().id};
    while (!stack.empty()) {
        const int b = stack.back();
        stack.pop_back();
        for (int nb : adj[b])
            if (seen.insert(nb).second) stack.push_back(nb);
    }
    for (const auto& bus : cfg.buses)
        if (!seen.count(bus.id))
            throw Error(ErrorKind::config,
                        "invariant: branch graph is not connected (bus " + std::to_string(bus.id) + " unreachable)");
}

}  // namespace detail

/// Checks every SystemConfig invariant; throws Error(config) naming the rule.
inline void validate(const SystemConfig& cfg) {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, "invariant: " + msg); };
    if (!(cfg.base_frequency_hz > 0)) fail("base_frequency_hz must be > 0");
    const auto slacks = std::count_if(cfg.buses.begin(), cfg.buses.end(),
                                      [](const BusSpec& b) { return b.kind == BusKind::slack; });
    if (slacks != 1) fail("exactly one slack bus required, found " + std::to_string(slacks));
    std::set<int> ids;
    for (const auto& b : cfg.buses) {
        if (!ids.insert(b.id).second) fail("duplicate bus id " + std::to_string(b.id));
        if (b.kind != BusKind::pq && !(b.v_set > 0)) fail("v_set must be > 0 on bus " + std::to_string(b.id));
        if (b.shunt_c && *b.shunt_c < 0) fail("shunt_c must be >= 0 on bus " + std::to_string(b.id));
    }
    for (const auto& br : cfg.branches) {
        const std::string tag = "branch " + std::to_string(br.from) + "-" + std::to_string(br.to);
        if (br.from == br.to) fail(tag + ": from must differ from to");
        if (!ids.count(br.from) || !ids.count(br.to)) fail(tag + ": references an unknown bus");
        if (br.r < 0) fail(tag + ": r must be >= 0");
        if (!(br.l > 0)) fail(tag + ": l must be > 0");
    }
    std::set<int> source_buses;
    for (const auto& s : cfg.sources) {
        const std::string tag = "source on bus " + std::to_string(s.bus);
        if (!ids.count(s.bus)) fail(tag + " references an unknown bus");
        if (!source_buses.insert(s.bus).second) fail("duplicate source on bus " + std::to_string(s.bus));
        const auto& bus = cfg.buses[cfg.bus_index(s.bus)];
        if (s.kind == SourceKind::infinite_bus && bus.kind != BusKind::slack)
            fail(tag + ": infinite_bus must sit on the slack bus");
        if (s.kind == SourceKind::gfl) {
            if (bus.kind != BusKind::pq) fail(tag + ": gfl buses are modeled as pq buses");
            const auto& g = s.gfl;
            if (!(g.ki_pll > 0)) fail(tag + ": ki_pll must be > 0");
            if (!(g.l_f > 0)) fail(tag + ": l_f must be > 0");
            if (g.r_f < 0) fail(tag + ": r_f must be >= 0");
            if (g.t_s < 0) fail(tag + ": t_s must be >= 0");
            if (g.dvl) {
                if (!(g.dvl->c_dc > 0)) fail(tag + ": c_dc must be > 0");
                if (!(g.dvl->u_dc_ref > 0)) fail(tag + ": u_dc_ref must be > 0");
            }
        }
    }
    detail::check_connected(cfg);
}

/// Parses and validates a configuration document.
inline SystemConfig load_config(const std::string& text) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "schema: TOML parse error: " << e.description() << " (line " << e.source().begin.line << ")";
        throw Error(ErrorKind::config, msg.str());
    }
    detail::reject_unknown_keys(root, {"system", "bus", "branch", "gfl", "solver"}, "document root");

    SystemConfig cfg;
    cfg.solver = detail::parse_solver(detail::subtable(root, "solver"));

    const toml::table* sys = detail::subtable(root, "system");
    if (!sys) throw Error(ErrorKind::config, "schema: missing section [system]");
    detail::reject_unknown_keys(*sys, {"base_frequency_hz", "s_base"}, "[system]");
    cfg.base_frequency_hz = detail::number(*sys, "base_frequency_hz", "[system]");
    if (auto sb = detail::optional_number(*sys, "s_base", "[system]")) cfg.s_base = *sb;

    for (const toml::table* t : detail::table_array(root, "bus")) {
        const std::string where = "[[bus]]";
        detail::reject_unknown_keys(*t, {"id", "kind", "v_set", "p_inj", "q_inj", "shunt_c"}, where);
        BusSpec b;
        b.id = detail::integer(*t, "id", where);
        const std::string kind = detail::string(*t, "kind", where);
        if (kind == "slack")
            b.kind = BusKind::slack;
        else if (kind == "pv")
            b.kind = BusKind::pv;
        else if (kind == "pq")
            b.kind = BusKind::pq;
        else
            throw Error(ErrorKind::config, "schema: bus kind must be slack|pv|pq, got '" + kind + "'");
        b.v_set = detail::optional_number(*t, "v_set", where).value_or(1.0);
        b.p_inj = detail::optional_number(*t, "p_inj", where).value_or(0.0);
        b.q_inj = detail::optional_number(*t, "q_inj", where).value_or(0.0);
        b.shunt_c = detail::optional_number(*t, "shunt_c", where);
        cfg.buses.push_back(b);
    }
    if (cfg.buses.empty()) throw Error(ErrorKind::config, "schema: at least one [[bus]] is required");

    for (const toml::table* t : detail::table_array(root, "branch")) {
        const std::string where = "[[branch]]";
        detail::reject_unknown_keys(*t, {"from", "to", "r", "l"}, where);
        BranchSpec br;
        br.from = detail::integer(*t, "from", where);
        br.to = detail::integer(*t, "to", where);
        br.r = detail::number(*t, "r", where);
        br.l = detail::number(*t, "l", where);
        cfg.branches.push_back(br);
    }

    // The slack bus hosts the infinite-bus source.
    for (const auto& b : cfg.buses)
        if (b.kind == BusKind::slack) cfg.sources.push_back({b.id, SourceKind::infinite_bus, {}});

    for (const toml::table* t : detail::table_array(root, "gfl")) {
        const std::string where = "[[gfl]]";
        detail::reject_unknown_keys(
            *t, {"bus", "kp_ccl", "ki_ccl", "kp_pll", "ki_pll", "r_f", "l_f", "t_s", "dvl"}, where);
        SourceSpec s;
        s.kind = SourceKind::gfl;
        s.bus = detail::integer(*t, "bus", where);
        auto& g = s.gfl;
        g.kp_ccl = detail::number(*t, "kp_ccl", where);
        g.ki_ccl = detail::number(*t, "ki_ccl", where);
        g.kp_pll = detail::number(*t, "kp_pll", where);
        g.ki_pll = detail::number(*t, "ki_pll", where);
        g.r_f = detail::number(*t, "r_f", where);
        g.l_f = detail::number(*t, "l_f", where);
        g.t_s = detail::optional_number(*t, "t_s", where).value_or(cfg.solver.default_t_s);
        if (const toml::table* d = detail::subtable(*t, "dvl")) {
            const std::string dw = "[gfl.dvl]";
            detail::reject_unknown_keys(*d, {"kp_dvl", "ki_dvl", "c_dc", "u_dc_ref"}, dw);
            DvlParams dvl;
            dvl.kp_dvl = detail::number(*d, "kp_dvl", dw);
            dvl.ki_dvl = detail::number(*d, "ki_dvl", dw);
            dvl.c_dc = detail::number(*d, "c_dc", dw);
            dvl.u_dc_ref = detail::number(*d, "u_dc_ref", dw);
            g.dvl = dvl;
        }
        cfg.sources.push_back(s);
    }

    validate(cfg);
    return cfg;
}

inline SystemConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::config, "cannot read config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_config(buf.str());
}

}  // namespace emai
