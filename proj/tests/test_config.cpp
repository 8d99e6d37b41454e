#include "support.hpp"

#include <gtest/gtest.h>

using namespace emai;

namespace {

const char* kMinimal = R"(
[system]
base_frequency_hz = 50.0

[[bus]]
id = 1
kind = "slack"
v_set = 1.0

[[bus]]
id = 2
kind = "pq"
p_inj = 0.5

[[branch]]
from = 1
to = 2
r = 0.01
l = 0.1

[[gfl]]
bus = 2
kp_ccl = 0.24
ki_ccl = 150.79
kp_pll = 31.42
ki_pll = 246.74
r_f = 0.01
l_f = 0.03
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto at = s.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    if (at != std::string::npos) s.replace(at, from.size(), to);
    return s;
}

ErrorKind kind_of(const std::string& text, std::string* what = nullptr) {
    try {
        load_config(text);
    } catch (const Error& e) {
        if (what) *what = e.what();
        return e.kind();
    }
    return ErrorKind::numeric;
}

}  // namespace

TEST(Config, MinimalTwoBus) {
    const SystemConfig cfg = load_config(kMinimal);
    EXPECT_EQ(cfg.buses.size(), 2u);
    EXPECT_EQ(cfg.branches.size(), 1u);
    ASSERT_EQ(cfg.sources.size(), 2u);
    EXPECT_EQ(cfg.sources[0].kind, SourceKind::infinite_bus);
    EXPECT_EQ(cfg.sources[0].bus, 1);
    EXPECT_EQ(cfg.sources[1].kind, SourceKind::gfl);
    EXPECT_DOUBLE_EQ(cfg.omega_base(), 2.0 * std::numbers::pi * 50.0);
    EXPECT_DOUBLE_EQ(cfg.shunt_c(cfg.buses[1]), 1e-4);
    EXPECT_EQ(cfg.solver.pade_order, 2);
    EXPECT_EQ(cfg.solver.contour_points, 64);
}

TEST(Config, TwoSlackBusesRejected) {
    std::string what;
    const std::string text = replace(kMinimal, "kind = \"pq\"", "kind = \"slack\"");
    EXPECT_EQ(kind_of(text, &what), ErrorKind::config);
    EXPECT_NE(what.find("exactly one slack"), std::string::npos) << what;
}

TEST(Config, UnknownKeyNamed) {
    std::string what;
    EXPECT_EQ(kind_of(replace(kMinimal, "r = 0.01\n", "r = 0.01\nx = 0.1\n"), &what), ErrorKind::config);
    EXPECT_NE(what.find("'x'"), std::string::npos) << what;
}

TEST(Config, MissingKeyNamed) {
    std::string what;
    EXPECT_EQ(kind_of(replace(kMinimal, "kp_ccl = 0.24\n", ""), &what), ErrorKind::config);
    EXPECT_NE(what.find("kp_ccl"), std::string::npos) << what;
}

TEST(Config, DuplicateSourceOnBus) {
    std::string what;
    std::string text = kMinimal;
    text += "\n[[gfl]]\nbus = 2\nkp_ccl = 1\nki_ccl = 1\nkp_pll = 1\nki_pll = 1\nr_f = 0\nl_f = 0.1\n";
    EXPECT_EQ(kind_of(text, &what), ErrorKind::config);
    EXPECT_NE(what.find("duplicate source on bus 2"), std::string::npos) << what;
}

TEST(Config, InvariantViolations) {
    EXPECT_EQ(kind_of(replace(kMinimal, "base_frequency_hz = 50.0", "base_frequency_hz = 0.0")), ErrorKind::config);
    EXPECT_EQ(kind_of(replace(kMinimal, "ki_pll = 246.74", "ki_pll = 0.0")), ErrorKind::config);
    EXPECT_EQ(kind_of(replace(kMinimal, "l_f = 0.03", "l_f = 0.0")), ErrorKind::config);
    EXPECT_EQ(kind_of(replace(kMinimal, "l = 0.1", "l = 0.0")), ErrorKind::config);
    EXPECT_EQ(kind_of(replace(kMinimal, "r = 0.01\n", "r = -0.01\n")), ErrorKind::config);
    EXPECT_EQ(kind_of(replace(kMinimal, "to = 2", "to = 1")), ErrorKind::config);
    EXPECT_EQ(kind_of(replace(kMinimal, "to = 2", "to = 7")), ErrorKind::config);
    EXPECT_EQ(kind_of(replace(kMinimal, "bus = 2\n", "bus = 9\n")), ErrorKind::config);
    EXPECT_EQ(kind_of(replace(kMinimal, "bus = 2\n", "bus = 1\n")), ErrorKind::config);
    EXPECT_EQ(kind_of(replace(kMinimal, "p_inj = 0.5", "p_inj = 0.5\nshunt_c = -1.0")), ErrorKind::config);
}

TEST(Config, DisconnectedGraphRejected) {
    std::string what;
    std::string text = kMinimal;
    text += "\n[[bus]]\nid = 3\nkind = \"pq\"\n";
    EXPECT_EQ(kind_of(text, &what), ErrorKind::config);
    EXPECT_NE(what.find("not connected"), std::string::npos) << what;
}

TEST(Config, DvlInvariants) {
    std::string text = kMinimal;
    text += "\n[gfl.dvl]\nkp_dvl = 1\nki_dvl = 1\nc_dc = 0\nu_dc_ref = 1\n";
    EXPECT_EQ(kind_of(text), ErrorKind::config);
}

TEST(Config, SolverOverrides) {
    std::string text = kMinimal;
    text += "\n[solver]\npade_order = 1\ndelay_model = \"exact\"\ndefault_shunt_c = 2e-4\nmax_mode_hz = 150\n";
    const SystemConfig cfg = load_config(text);
    EXPECT_EQ(cfg.solver.pade_order, 1);
    EXPECT_EQ(cfg.solver.delay_model, DelayModel::exact);
    EXPECT_DOUBLE_EQ(cfg.shunt_c(cfg.buses[1]), 2e-4);
    EXPECT_DOUBLE_EQ(cfg.solver.max_mode_hz, 150.0);
    EXPECT_EQ(kind_of(std::string(kMinimal) + "\n[solver]\npade_order = 3\n"), ErrorKind::config);
    EXPECT_EQ(kind_of(std::string(kMinimal) + "\n[solver]\ndelay_model = \"fast\"\n"), ErrorKind::config);
}

TEST(Config, DefaultSamplingPeriodApplies) {
    const SystemConfig cfg = load_config(std::string(kMinimal) + "\n[solver]\ndefault_t_s = 2e-4\n");
    EXPECT_DOUBLE_EQ(cfg.gfl_sources().front()->gfl.t_s, 2e-4);
}

TEST(Config, TomlSyntaxError) {
    std::string what;
    EXPECT_EQ(kind_of("[system\nbase_frequency_hz = 50", &what), ErrorKind::config);
    EXPECT_NE(what.find("parse error"), std::string::npos) << what;
}

TEST(Config, MissingFileNamesPath) {
    try {
        load_config_file("/nonexistent/missing.toml");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
        EXPECT_NE(std::string(e.what()).find("/nonexistent/missing.toml"), std::string::npos);
    }
}

TEST(Config, Ieee14FixtureHighGainPll) {
    const SystemConfig& cfg = test::fixture_config("ieee14_gfl");
    EXPECT_EQ(cfg.buses.size(), 14u);
    std::vector<int> buses;
    for (const auto* s : cfg.gfl_sources()) buses.push_back(s->bus);
    EXPECT_EQ(buses, (std::vector<int>{2, 3, 6, 8}));
    const SourceSpec* g6 = cfg.gfl_at(6);
    ASSERT_NE(g6, nullptr);
    EXPECT_DOUBLE_EQ(g6->gfl.kp_pll, 125.66);
    EXPECT_DOUBLE_EQ(g6->gfl.ki_pll, 3947.84);
    const SourceSpec* g8 = cfg.gfl_at(8);
    EXPECT_DOUBLE_EQ(g8->gfl.kp_pll, 31.42);
    EXPECT_DOUBLE_EQ(g8->gfl.ki_pll, 246.74);
    EXPECT_DOUBLE_EQ(g8->gfl.kp_ccl, 0.24);
    EXPECT_DOUBLE_EQ(g8->gfl.ki_ccl, 150.79);
    EXPECT_DOUBLE_EQ(cfg.base_frequency_hz, 50.0);
}
