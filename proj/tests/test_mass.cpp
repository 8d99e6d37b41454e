#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace emai;

namespace {

MatXd random_stable(std::mt19937& rng, int n) {
    std::normal_distribution<double> g;
    MatXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    // Shift left of the largest real part.
    const Eigen::EigenSolver<MatXd> es(a);
    const double shift = es.eigenvalues().real().maxCoeff() + 1.0;
    return a - shift * MatXd::Identity(n, n);
}

double column_sum_error(const EigenDecomposition& e) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < e.p.cols(); ++i) worst = std::max(worst, std::abs(e.p.col(i).sum() - 1.0));
    return worst;
}

}  // namespace

TEST(Mass, DiagonalMatrixHasIdentityParticipation) {
    MatXd a = MatXd::Zero(2, 2);
    a(0, 0) = -1.0;
    a(1, 1) = -2.0;
    const EigenDecomposition e = eigen_analysis(a);
    for (Eigen::Index i = 0; i < 2; ++i) {
        const Eigen::Index k = e.lambda(i).real() == -1.0 ? 0 : 1;
        EXPECT_NEAR(std::abs(e.p(k, i) - 1.0), 0.0, 1e-15);
        EXPECT_NEAR(std::abs(e.p(1 - k, i)), 0.0, 1e-15);
    }
}

TEST(Mass, ParticipationIsDiagonalSensitivity) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const MatXd a = random_stable(rng, 4);
        const EigenDecomposition e = eigen_analysis(a);
        EXPECT_LT(column_sum_error(e), 1e-10);
        for (Eigen::Index k = 0; k < 4; ++k) {
            const double h = 1e-6;
            MatXd up = a, dn = a;
            up(k, k) += h;
            dn(k, k) -= h;
            const EigenDecomposition eu = eigen_analysis(up), ed = eigen_analysis(dn);
            for (Eigen::Index i = 0; i < 4; ++i) {
                const Eigen::Index iu = nearest_eigenvalue(eu.lambda, e.lambda(i));
                const Eigen::Index id = nearest_eigenvalue(ed.lambda, e.lambda(i));
                const Complex fd = (eu.lambda(iu) - ed.lambda(id)) / (2 * h);
                EXPECT_LT(std::abs(fd - e.p(k, i)), 1e-5 * std::max(1.0, std::abs(e.p(k, i))));
            }
        }
    }
}

TEST(Mass, InvariantUnderStateScaling) {
    std::mt19937 rng(3);
    const MatXd a = random_stable(rng, 5);
    VecXd d(5);
    d << 1.0, 1e3, 1e-2, 7.0, 0.5;
    const MatXd b = d.asDiagonal() * a * d.cwiseInverse().asDiagonal();
    const EigenDecomposition ea = eigen_analysis(a), eb = eigen_analysis(b);
    for (Eigen::Index i = 0; i < 5; ++i) {
        const Eigen::Index j = nearest_eigenvalue(eb.lambda, ea.lambda(i));
        EXPECT_LT((ea.p.col(i) - eb.p.col(j)).norm(), 1e-9);
    }
}

TEST(Mass, EigenvectorsAreBiorthogonal) {
    const StateSpaceModel& m = *test::fixture_analysis("ieee14_gfl").mass_model;
    const EigenDecomposition e = eigen_analysis(m);
    EXPECT_TRUE(e.reliable);
    const Eigen::Index n = m.n();
    EXPECT_LT((e.psi * e.phi - MatXc::Identity(n, n)).norm(), 1e-9);
    EXPECT_LT((m.a.cast<Complex>() * e.phi - e.phi * e.lambda.asDiagonal()).norm() / m.a.norm(), 1e-12);
    EXPECT_LT(column_sum_error(e), 1e-10);
}

TEST(Mass, GroupsPartitionEveryState) {
    for (const char* name : {"smib", "radial4", "ieee14_gfl"}) {
        const AnalysisResult& r = test::fixture_analysis(name);
        for (Eigen::Index i = 0; i < r.eig->lambda.size(); ++i) {
            const GroupedPf g = grouped_pf(*r.eig, *r.mass_model, i);
            Complex total = g.network;
            double pr = 0.0;
            for (std::size_t k = 0; k < g.sources.size(); ++k) {
                total += g.sources[k].pf_me2 + g.sources[k].pf_ms2;
                pr += g.pr_me2[k] + g.pr_ms2[k];
            }
            EXPECT_LT(std::abs(total - 1.0), 1e-9) << name;
            EXPECT_NEAR(pr, 1.0, 1e-12) << name;
        }
    }
}

TEST(Mass, UnlabeledStateRejected) {
    StateSpaceModel m = *test::fixture_analysis("smib").mass_model;
    m.states.pop_back();
    EXPECT_THROW(grouped_pf(eigen_analysis(m), m, 0), Error);
}

TEST(Mass, SingleSourceTakesAllSourceParticipation) {
    const AnalysisResult& r = test::fixture_analysis("smib");
    for (const auto& m : r.modes) {
        if (!m.mass) continue;
        ASSERT_EQ(m.mass->sources.size(), 1u);
        EXPECT_NEAR(m.mass->pr_me2[0] + m.mass->pr_ms2[0], 1.0, 1e-12);
    }
}

TEST(Mass, HighGainPllDominatesSynchronizationOfLeastDampedMode) {
    const ModeAnalysis& m = test::least_damped(test::fixture_analysis("radial4"));
    ASSERT_TRUE(m.mass);
    const auto top = argmax_all(m.mass->pr_ms2);
    ASSERT_EQ(top.size(), 1u);
    EXPECT_EQ(m.mass->sources[top[0]].bus, 6);
}

TEST(Mass, ForcedResponseIsLinearInAmplitude) {
    const AnalysisResult& r = test::fixture_analysis("radial4");
    const auto zero = forced_response(*r.mass_model, *r.eig, 20.0, 0.0);
    const auto one = forced_response(*r.mass_model, *r.eig, 20.0, 0.05);
    const auto two = forced_response(*r.mass_model, *r.eig, 20.0, 0.10);
    ASSERT_EQ(one.size(), 4u);
    for (std::size_t k = 0; k < one.size(); ++k) {
        EXPECT_EQ(zero[k].current, 0.0);
        EXPECT_EQ(zero[k].frequency, 0.0);
        EXPECT_NEAR(two[k].current, 2.0 * one[k].current, 1e-14);
        EXPECT_NEAR(two[k].frequency, 2.0 * one[k].frequency, 1e-12);
        EXPECT_NEAR(two[k].voltage, 2.0 * one[k].voltage, 1e-14);
    }
}

TEST(Mass, ForcedResponseOrderingFollowsParticipation) {
    const AnalysisResult& r = test::fixture_analysis("radial4");
    const ModeAnalysis& m = test::least_damped(r);
    const auto resp = forced_response(*r.mass_model, *r.eig, m.mode.frequency_hz(), 0.05);
    std::vector<double> ed, sd, current, frequency;
    for (const auto& s : m.emai->sources) {
        ed.push_back(s.pr_mc1);
        sd.push_back(s.pr_ms1);
    }
    for (const auto& g : resp) {
        current.push_back(g.current);
        frequency.push_back(g.frequency);
    }
    EXPECT_EQ(argmax_all(ed), argmax_all(current));
    EXPECT_EQ(argmax_all(sd), argmax_all(frequency));
    EXPECT_EQ(resp[argmax_all(frequency)[0]].bus, 6);
}

TEST(Mass, ForcingAtAPoleRejected) {
    const BranchSpec br{1, 2, 0.0, 0.1};
    StateSpaceModel m = rl_branch_state_space(br, kTwoPi * 50.0);
    m.inputs = {"slack_vD", "slack_vQ"};
    const EigenDecomposition e = eigen_analysis(m);
    EXPECT_THROW(forced_response(m, e, 50.0, 0.05), Error);
}

TEST(Mass, ZeroCapacitanceBusRejected) {
    SystemConfig cfg = test::fixture_config("smib");
    cfg.buses[1].shunt_c = 0.0;
    try {
        assemble_system(cfg, solve_power_flow(cfg), 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
        EXPECT_NE(std::string(e.what()).find("zero capacitance"), std::string::npos);
    }
}

TEST(Mass, FourteenBusSpectrumStable) {
    const AnalysisResult& r = test::fixture_analysis("ieee14_gfl");
    EXPECT_LT(r.eig->lambda.real().maxCoeff(), 0.0);
    const std::size_t expected = 2 * 13 + 2 * r.config.branches.size() + 4 * 6;
    EXPECT_EQ(static_cast<std::size_t>(r.mass_model->n()), expected);
}

TEST(Mass, DeviceRealizationDimensions) {
    GflParams p = test::reference_params();
    p.t_s = 1e-4;
    p.dvl = test::reference_dvl();
    const StateSpaceModel m = gfl_state_space(p, test::loaded_op(1.0, 0.5, 0.1, 0.2, p), kTwoPi * 50.0, 2);
    EXPECT_EQ(m.n(), 6 + 2 + 4);
    std::size_t ed = 0, sd = 0;
    for (const auto& l : m.states) {
        ed += is_ed_state(l.name);
        sd += is_sd_state(l.name);
    }
    EXPECT_EQ(ed, 10u);
    EXPECT_EQ(sd, 2u);
}

TEST(Mass, DvlVariantHasDcModes) {
    const SystemConfig cfg = load_config(test::kSmibDvl);
    const OperatingPoint op = solve_power_flow(cfg);
    const StateSpaceModel m = assemble_system(cfg, op, 2);
    const EigenDecomposition e = eigen_analysis(m);
    EXPECT_LT(e.lambda.real().maxCoeff(), 0.0);
    bool dc = false;
    for (Eigen::Index i = 0; i < e.lambda.size(); ++i) {
        const GroupedPf g = grouped_pf(e, m, i);
        dc = dc || g.sources[0].has_dvl;
    }
    EXPECT_TRUE(dc);
}
