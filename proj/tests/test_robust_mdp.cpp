#include "oracles.hpp"

#include "rapo/robust_mdp.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rapo;

namespace
{

TabularMdp single_state(double r, double gamma)
{
    TabularMdp m;
    m.n_states = 1;
    m.n_actions = 1;
    m.gamma = gamma;
    m.kernel = MatrixXd::Ones(1, 1);
    m.rewards = MatrixXd::Constant(1, 1, r);
    m.initial_dist = VectorXd::Ones(1);
    return m;
}

// two states, two actions, hand-set kernel
TabularMdp two_by_two()
{
    TabularMdp m;
    m.n_states = 2;
    m.n_actions = 2;
    m.gamma = 0.8;
    m.kernel.resize(4, 2);
    m.kernel << 0.9, 0.1, 0.3, 0.7, 0.4, 0.6, 0.5, 0.5;
    m.rewards.resize(2, 2);
    m.rewards << 1.0, 0.2, 0.0, 0.6;
    m.initial_dist = (VectorXd(2) << 0.5, 0.5).finished();
    return m;
}

// s0 chooses: action 0 goes surely to s1 (worth 0.6), action 1 reaches s2 (worth 1) w.p. 0.7 else s3 (worth 0)
TabularMdp bandit()
{
    TabularMdp m;
    m.n_states = 4;
    m.n_actions = 2;
    m.gamma = 0.9;
    m.kernel = MatrixXd::Zero(8, 4);
    m.kernel(m.row(0, 0), 1) = 1.0;
    m.kernel(m.row(0, 1), 2) = 0.7;
    m.kernel(m.row(0, 1), 3) = 0.3;
    for (int s = 1; s < 4; ++s) {
        m.kernel(m.row(s, 0), s) = 1.0;
        m.kernel(m.row(s, 1), s) = 1.0;
    }
    m.rewards = MatrixXd::Zero(4, 2);
    m.initial_dist = (VectorXd(4) << 1.0, 0.0, 0.0, 0.0).finished();
    return m;
}

} // namespace

TEST(RobustBackup, ZeroBudgetIsNominal)
{
    Rng rng(1);
    const TabularMdp mdp = oracle::random_mdp(rng, 4, 3, 0.9);
    const PolicyTable pi = oracle::random_policy(rng, 4, 3);
    const VectorXd v = oracle::random_values(rng, 4, 0.0, 3.0);
    VectorXd nominal = VectorXd::Zero(4);
    for (int s = 0; s < 4; ++s) {
        for (int a = 0; a < 3; ++a) {
            nominal(s) += pi(s, a) * (mdp.rewards(s, a) + mdp.gamma * mdp.kernel.row(mdp.row(s, a)).dot(v));
        }
    }
    EXPECT_LE((robust_evaluation_backup(v, mdp, pi, 0.0, {}) - nominal).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(RobustBackup, SingleStateIsVacuous)
{
    const TabularMdp mdp = single_state(0.5, 0.9);
    const VectorXd v = VectorXd::Constant(1, 2.0);
    EXPECT_DOUBLE_EQ(robust_evaluation_backup(v, mdp, MatrixXd::Ones(1, 1), 0.7, {})(0), 0.5 + 0.9 * 2.0);
}

TEST(RobustBackup, MatchesRowwisePrimal)
{
    const TabularMdp mdp = two_by_two();
    const PolicyTable pi = (MatrixXd(2, 2) << 0.3, 0.7, 0.6, 0.4).finished();
    const VectorXd v = (VectorXd(2) << 1.5, -0.5).finished();
    const double eps = 0.1;
    VectorXd expected = VectorXd::Zero(2);
    for (int s = 0; s < 2; ++s) {
        for (int a = 0; a < 2; ++a) {
            const VectorXd row = mdp.kernel.row(mdp.row(s, a)).transpose();
            expected(s) += pi(s, a) * (mdp.rewards(s, a) + mdp.gamma * oracle::primal_min(v, row, eps));
        }
    }
    EXPECT_LE((robust_evaluation_backup(v, mdp, pi, eps, {}) - expected).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(RobustOptimality, LargeBudgetFlipsRiskyAction)
{
    const TabularMdp mdp = bandit();
    const VectorXd v = (VectorXd(4) << 0.0, 0.6, 1.0, 0.0).finished();
    auto [v0, g0] = robust_optimality_backup(v, mdp, 0.0, {});
    EXPECT_EQ(g0(0, 1), 1.0);
    EXPECT_NEAR(v0(0), 0.9 * 0.7, 1e-14);
    const double eps = 0.5;
    auto [v1, g1] = robust_optimality_backup(v, mdp, eps, {});
    const double risky = oracle::golden_dual((VectorXd(2) << 1.0, 0.0).finished(),
                                             (VectorXd(2) << 0.7, 0.3).finished(), eps);
    ASSERT_LT(risky, 0.6);
    EXPECT_EQ(g1(0, 0), 1.0);
    EXPECT_NEAR(robust_q(v, mdp, eps, {})(0, 1), 0.9 * risky, 1e-8);
}

TEST(RobustValueIteration, ZeroBudgetMatchesValueIteration)
{
    Rng rng(2);
    const TabularMdp mdp = oracle::random_mdp(rng, 5, 3, 0.9);
    const RobustViResult a = robust_value_iteration(mdp, 0.0, {}, 1e-10);
    const RobustViResult b = value_iteration(mdp, 1e-10);
    EXPECT_LE((a.v - b.v).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(RobustValueIteration, MatchesEnumeration)
{
    Rng rng(3);
    const TabularMdp mdp = oracle::random_mdp(rng, 3, 2, 0.85);
    const RobustViResult vi = robust_value_iteration(mdp, 0.2, {}, 1e-11);
    VectorXd best = VectorXd::Constant(3, -1e300);
    for (const auto& acts : oracle::all_deterministic(3, 2)) {
        best = best.cwiseMax(oracle::robust_eval(mdp, acts, 0.2));
    }
    EXPECT_LE((vi.v - best).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(RobustValueIteration, MaxIterThrows)
{
    Rng rng(4);
    const TabularMdp mdp = oracle::random_mdp(rng, 3, 2, 0.9);
    try {
        robust_value_iteration(mdp, 0.1, {}, 1e-12, 2);
        FAIL() << "expected ConvergenceError";
    }
    catch (const ConvergenceError& e) {
        EXPECT_GT(e.residual(), 0.0);
    }
}

TEST(RobustPolicyEvaluation, BelowNominal)
{
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const TabularMdp mdp = oracle::random_mdp(rng, 4, 2, 0.9);
        const PolicyTable pi = oracle::random_policy(rng, 4, 2);
        const ValueFn vr = robust_policy_evaluation(mdp, pi, 0.3, {});
        const ValueFn vn = nominal_policy_evaluation(mdp.kernel, mdp.rewards, pi, mdp.gamma);
        EXPECT_TRUE(((vr - vn).array() <= 1e-10).all());
        EXPECT_LE((robust_evaluation_backup(vr, mdp, pi, 0.3, {}) - vr).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(WorstCaseKernel, Examples)
{
    Rng rng(6);
    const TabularMdp mdp = oracle::random_mdp(rng, 4, 2, 0.9);
    const PolicyTable pi = oracle::random_policy(rng, 4, 2);
    const ValueFn vn = nominal_policy_evaluation(mdp.kernel, mdp.rewards, pi, mdp.gamma);
    EXPECT_EQ(extract_worst_case_kernel(mdp, pi, vn, 0.0, {}).kernel, mdp.kernel);
    EXPECT_TRUE(extract_worst_case_kernel(mdp, pi, VectorXd::Constant(4, 3.0), 0.4, {}).kernel.isApprox(mdp.kernel, 1e-14));

    const ValueFn vr = robust_policy_evaluation(mdp, pi, 0.25, {});
    const WorstCaseKernel wc = extract_worst_case_kernel(mdp, pi, vr, 0.25, {});
    EXPECT_LE((oracle::policy_value(wc.kernel, mdp.rewards, pi, mdp.gamma) - vr).cwiseAbs().maxCoeff(), 1e-6);
    for (int s = 0; s < 4; ++s) {
        for (int a = 0; a < 2; ++a) {
            const Eigen::Index r = mdp.row(s, a);
            EXPECT_LE(oracle::kl(wc.kernel.row(r).transpose(), mdp.kernel.row(r).transpose()), 0.25 + 1e-8);
        }
    }
}

TEST(NominalEvaluation, ClosedForms)
{
    const TabularMdp one = single_state(1.0, 0.9);
    EXPECT_NEAR(nominal_policy_evaluation(one.kernel, one.rewards, MatrixXd::Ones(1, 1), 0.9)(0), 10.0, 1e-12);

    // s0 -> s1 with reward 0, s1 loops with reward 1
    Kernel k(2, 2);
    k << 0.0, 1.0, 0.0, 1.0;
    MatrixXd r(2, 1);
    r << 0.0, 1.0;
    const ValueFn v = nominal_policy_evaluation(k, r, MatrixXd::Ones(2, 1), 0.8);
    EXPECT_NEAR(v(1), 5.0, 1e-12);
    EXPECT_NEAR(v(0), 4.0, 1e-12);
    EXPECT_EQ(nominal_policy_evaluation(k, MatrixXd::Zero(2, 1), MatrixXd::Ones(2, 1), 0.8).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Occupancy, ClosedForms)
{
    EXPECT_NEAR(occupancy_measure(MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), 0.9, VectorXd::Ones(1))(0), 1.0, 1e-14);

    Kernel k(2, 2);
    k << 0.0, 1.0, 0.0, 1.0;
    const VectorXd d = occupancy_measure(k, MatrixXd::Ones(2, 1), 0.7, (VectorXd(2) << 1.0, 0.0).finished());
    EXPECT_NEAR(d(0), 0.3, 1e-14);
    EXPECT_NEAR(d(1), 0.7, 1e-14);

    const VectorXd mu = (VectorXd(3) << 0.2, 0.5, 0.3).finished();
    const VectorXd stay = occupancy_measure(MatrixXd::Identity(3, 3), MatrixXd::Ones(3, 1), 0.9, mu);
    EXPECT_LE((stay - mu).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Rpdl, SamePolicyIsZero)
{
    Rng rng(7);
    const TabularMdp mdp = oracle::random_mdp(rng, 3, 2, 0.9);
    const PolicyTable pi = oracle::random_policy(rng, 3, 2);
    const RpdlReport r = rpdl_report(mdp, pi, pi, 0.3, {});
    EXPECT_NEAR(r.lhs, 0.0, 1e-12);
    EXPECT_NEAR(r.rhs, 0.0, 1e-9);
}

TEST(Rpdl, ZeroBudgetIsClassicalPdl)
{
    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
        const TabularMdp mdp = oracle::random_mdp(rng, 3, 2, 0.9);
        const PolicyTable pi = oracle::random_policy(rng, 3, 2);
        const PolicyTable pp = oracle::random_policy(rng, 3, 2);
        EXPECT_LE(rpdl_residual(mdp, pi, pp, 0.0, {}), 1e-10);
    }
}

TEST(Rpdl, SharedKernelIdentity)
{
    Rng rng(9);
    for (int i = 0; i < 20; ++i) {
        const TabularMdp mdp = oracle::random_mdp(rng, 3, 2, 0.9);
        const RpdlReport r =
            rpdl_report(mdp, oracle::random_policy(rng, 3, 2), oracle::random_policy(rng, 3, 2), 0.3, {});
        EXPECT_LE(r.residual_shared_kernel, 1e-7);
    }
}

TEST(ValueDrop, Examples)
{
    Rng rng(10);
    const TabularMdp mdp = oracle::random_mdp(rng, 4, 2, 0.9);
    const PolicyTable pi = oracle::random_policy(rng, 4, 2);
    EXPECT_LE(value_drop_check(mdp, pi, 0.0, {}).gap.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(value_drop_check(single_state(0.3, 0.9), MatrixXd::Ones(1, 1), 0.8, {}).gap(0), 0.0);
    for (int i = 0; i < 20; ++i) {
        const TabularMdp m = oracle::random_mdp(rng, 5, 2, 0.9);
        const ValueDrop d = value_drop_check(m, oracle::random_policy(rng, 5, 2), 0.4, {});
        EXPECT_LE(d.gap.maxCoeff(), d.bound + 1e-9);
        EXPECT_GE(d.gap.minCoeff(), -1e-9);
    }
}
