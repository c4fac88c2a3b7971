#include "oracles.hpp"

#include "rapo/gridworld.hpp"
#include "rapo/rapo.hpp"
#include "rapo/robust_mdp.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rapo;

namespace
{

// 0 -> 1 -> 2 -> 3 (absorbing), one action, rewards 0.1, 0.2, 0.3
TabularMdp line_env()
{
    TabularMdp m;
    m.n_states = 4;
    m.n_actions = 1;
    m.gamma = 0.9;
    m.kernel = MatrixXd::Zero(4, 4);
    m.kernel(0, 1) = 1.0;
    m.kernel(1, 2) = 1.0;
    m.kernel(2, 3) = 1.0;
    m.kernel(3, 3) = 1.0;
    m.rewards = (MatrixXd(4, 1) << 0.1, 0.2, 0.3, 0.0).finished();
    m.initial_dist = (VectorXd(4) << 1.0, 0.0, 0.0, 0.0).finished();
    return m;
}

// one state, three self-looping actions; action 0 pays 1 so the state is not absorbing
TabularMdp bandit_env()
{
    TabularMdp m;
    m.n_states = 1;
    m.n_actions = 3;
    m.gamma = 0.9;
    m.kernel = MatrixXd::Ones(3, 1);
    m.rewards = (MatrixXd(1, 3) << 1.0, 0.0, 0.0).finished();
    m.initial_dist = VectorXd::Ones(1);
    return m;
}

struct Small
{
    TabularMdp mdp;
    EnsembleSpec ens;
    TrainConfig cfg;
};

Small small_setup()
{
    Small s;
    s.mdp = bridge_world(BridgeParams{});
    s.ens = build_ensemble(s.mdp, (VectorXd(3) << 0.5, 1.0, 1.5).finished(), Perturbation::SlipScale);
    s.cfg.updates = 6;
    s.cfg.rollout_length = 128;
    s.cfg.seed = 3;
    return s;
}

} // namespace

TEST(Rollout, DeterministicRewardSchedule)
{
    const TabularMdp env = line_env();
    const SoftmaxPolicy pi = SoftmaxPolicy::zeros(4, 1);
    Rng rng(1);
    const RolloutBuffer buf = collect_rollout(env, pi, 9, rng);
    ASSERT_EQ(buf.size(), 9u);
    for (std::size_t t = 0; t < 9; ++t) {
        EXPECT_DOUBLE_EQ(buf.rewards[t], 0.1 * static_cast<double>(t % 3 + 1));
        EXPECT_EQ(buf.done_flags[t], t % 3 == 2 ? 1.0 : 0.0);
        EXPECT_EQ(buf.states[t], static_cast<int>(t % 3));
    }
    ASSERT_EQ(buf.episode_returns.size(), 3u);
    EXPECT_NEAR(buf.episode_returns[0], 0.6, 1e-15);
}

TEST(Rollout, HorizonEndsEpisodes)
{
    const TabularMdp env = bandit_env();
    Rng rng(2);
    const RolloutBuffer buf = collect_rollout(env, SoftmaxPolicy::zeros(1, 3), 20, rng, 5);
    for (std::size_t t = 0; t < 20; ++t) {
        EXPECT_EQ(buf.episode_end[t], t % 5 == 4 ? 1.0 : 0.0);
        EXPECT_EQ(buf.done_flags[t], 0.0);
    }
}

TEST(Rollout, ActionFrequenciesMatchPolicy)
{
    const TabularMdp env = bandit_env();
    SoftmaxPolicy pi = SoftmaxPolicy::zeros(1, 3);
    pi.logits << 0.5, -0.3, 0.1;
    const VectorXd p = pi.action_probs(0);
    Rng rng(3);
    const int n = 30000;
    const RolloutBuffer buf = collect_rollout(env, pi, n, rng);
    VectorXd counts = VectorXd::Zero(3);
    for (int a : buf.actions) {
        counts(a) += 1.0;
    }
    double chi2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double e = n * p(a);
        chi2 += (counts(a) - e) * (counts(a) - e) / e;
    }
    for (std::size_t t = 0; t < 100; ++t) {
        EXPECT_NEAR(buf.log_probs[t], std::log(p(buf.actions[t])), 1e-12);
    }
    // chi-square with 2 degrees of freedom, p = 0.001
    EXPECT_LT(chi2, 13.816);
}

TEST(Gae, OneStepAtZeroLambda)
{
    const VectorXd r = (VectorXd(4) << 1.0, 0.5, -0.2, 0.3).finished();
    const VectorXd v = (VectorXd(4) << 0.2, 0.4, 0.1, 0.7).finished();
    const VectorXd d = (VectorXd(4) << 0.0, 1.0, 0.0, 0.0).finished();
    const Gae g = gae(r, v, 0.9, d, 0.95, 0.0);
    const VectorXd next = (VectorXd(4) << 0.4, 0.1, 0.7, 0.9).finished();
    for (int t = 0; t < 4; ++t) {
        EXPECT_NEAR(g.advantages(t), r(t) + 0.95 * (1.0 - d(t)) * next(t) - v(t), 1e-15);
        EXPECT_NEAR(g.returns(t), g.advantages(t) + v(t), 1e-15);
    }
}

TEST(Gae, MonteCarloAtUnitLambda)
{
    Rng rng(4);
    const VectorXd r = oracle::random_values(rng, 6);
    const VectorXd v = oracle::random_values(rng, 6);
    const double vt = 0.37;
    const double gamma = 0.9;
    const Gae g = gae(r, v, vt, VectorXd::Zero(6), gamma, 1.0);
    for (int t = 0; t < 6; ++t) {
        double sum = 0.0;
        for (int k = t; k < 6; ++k) {
            sum += std::pow(gamma, k - t) * r(k);
        }
        sum += std::pow(gamma, 6 - t) * vt;
        EXPECT_NEAR(g.advantages(t), sum - v(t), 1e-12);
    }
}

TEST(Gae, ZerosGiveZeros)
{
    const Gae g = gae(VectorXd::Zero(5), VectorXd::Zero(5), 0.0, VectorXd::Zero(5), 0.9, 0.95);
    EXPECT_EQ(g.advantages.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g.returns.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gae, FromDeltasCutsAtEpisodeEnd)
{
    const VectorXd delta = (VectorXd(4) << 1.0, 2.0, 3.0, 4.0).finished();
    const VectorXd end = (VectorXd(4) << 0.0, 1.0, 0.0, 0.0).finished();
    const Gae g = gae_from_deltas(delta, VectorXd::Zero(4), end, 0.5, 1.0);
    EXPECT_NEAR(g.advantages(1), 2.0, 1e-15);
    EXPECT_NEAR(g.advantages(0), 1.0 + 0.5 * 2.0, 1e-15);
    EXPECT_NEAR(g.advantages(2), 3.0 + 0.5 * 4.0, 1e-15);
}

namespace
{

RolloutBuffer bandit_buffer(const SoftmaxPolicy& pi, const std::vector<int>& actions)
{
    RolloutBuffer b;
    for (int a : actions) {
        b.states.push_back(0);
        b.actions.push_back(a);
        b.next_states.push_back(0);
        b.rewards.push_back(0.0);
        b.done_flags.push_back(0.0);
        b.episode_end.push_back(0.0);
        b.log_probs.push_back(std::log(pi.action_probs(0)(a)));
        b.value_estimates.push_back(pi.critic(0));
    }
    return b;
}

} // namespace

TEST(PpoUpdate, PositiveAdvantageRaisesLogit)
{
    SoftmaxPolicy pi = SoftmaxPolicy::zeros(1, 2);
    const RolloutBuffer b = bandit_buffer(pi, {0, 0, 1, 0, 1, 0, 1, 1});
    VectorXd adv(8);
    for (int i = 0; i < 8; ++i) {
        adv(i) = b.actions[static_cast<std::size_t>(i)] == 0 ? 1.0 : 0.0;
    }
    PpoConfig cfg;
    cfg.normalize_advantages = false;
    cfg.epochs = 1;
    cfg.minibatches = 1;
    Rng rng(5);
    PpoOptimizer opt;
    ppo_update(pi, b, adv, VectorXd::Zero(8), cfg, rng, opt);
    EXPECT_GT(pi.logits(0, 0), 0.0);
    EXPECT_GT(pi.logits(0, 0), pi.logits(0, 1));
}

TEST(PpoUpdate, ZeroAdvantagesLeaveActor)
{
    SoftmaxPolicy pi = SoftmaxPolicy::zeros(1, 2);
    pi.logits << 0.3, -0.2;
    const MatrixXd before = pi.logits;
    const RolloutBuffer b = bandit_buffer(pi, {0, 1, 1, 0});
    PpoConfig cfg;
    cfg.normalize_advantages = false;
    Rng rng(6);
    PpoOptimizer opt;
    const PpoStats st = ppo_update(pi, b, VectorXd::Zero(4), VectorXd::Constant(4, 2.0), cfg, rng, opt);
    EXPECT_EQ(pi.logits, before);
    EXPECT_GT(pi.critic(0), 0.0);
    EXPECT_NEAR(st.actor_loss, 0.0, 1e-15);
}

TEST(PpoUpdate, CriticMovesTowardReturns)
{
    SoftmaxPolicy pi = SoftmaxPolicy::zeros(1, 2);
    const RolloutBuffer b = bandit_buffer(pi, {0, 1});
    PpoConfig cfg;
    Rng rng(7);
    PpoOptimizer opt;
    for (int i = 0; i < 200; ++i) {
        ppo_update(pi, b, VectorXd::Zero(2), VectorXd::Constant(2, 1.5), cfg, rng, opt);
    }
    EXPECT_NEAR(pi.critic(0), 1.5, 1e-2);
}

TEST(TrainConfig, RejectsInvalid)
{
    TrainConfig c;
    c.validate();
    c.samples_m = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.epsilon = -0.1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.gamma = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(CheckFinite, NamesField)
{
    UpdateMetrics m;
    check_finite(m);
    m.critic_loss = std::nan("");
    try {
        check_finite(m);
        FAIL();
    }
    catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("critic_loss"), std::string::npos);
    }
}

TEST(Train, Deterministic)
{
    const Small s = small_setup();
    const TrainResult a = rapo_train(s.mdp, s.ens, s.cfg);
    const TrainResult b = rapo_train(s.mdp, s.ens, s.cfg);
    ASSERT_EQ(a.metrics.size(), b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        EXPECT_EQ(a.metrics[i].total_loss, b.metrics[i].total_loss);
        EXPECT_EQ(a.metrics[i].mean_target, b.metrics[i].mean_target);
    }
    EXPECT_EQ(a.policy.logits, b.policy.logits);
}

TEST(Train, BothFlagsOnIsRapo)
{
    const Small s = small_setup();
    const TrainResult a = rapo_train(s.mdp, s.ens, s.cfg);
    const TrainResult b = ablation_variant(s.mdp, s.ens, s.cfg, true, true);
    EXPECT_EQ(a.policy.logits, b.policy.logits);
    EXPECT_EQ(a.policy.critic, b.policy.critic);
}

TEST(Train, ZeroBudgetsReduceToPpo)
{
    Small s = small_setup();
    s.cfg.epsilon = 0.0;
    s.cfg.kappa = 0.0;
    const TrainResult a = ablation_variant(s.mdp, s.ens, s.cfg, false, true);
    const TrainResult b = ppo_train(s.mdp, s.ens, s.cfg);
    ASSERT_EQ(a.metrics.size(), b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        EXPECT_NEAR(a.metrics[i].total_loss, b.metrics[i].total_loss, 1e-9);
    }
}

TEST(Train, LargeKappaConcentratesWithinThreeUpdates)
{
    // dense rewards so the critic separates the models early; higher stay probability is more adverse
    const TabularMdp mdp = chain_world(5, 0.3, 0.9);
    const EnsembleSpec ens = build_ensemble(mdp, (VectorXd(3) << 0.5, 1.0, 2.0).finished(), Perturbation::StayScale);
    Eigen::Index worst = 0;
    per_model_returns(mdp, ens, uniform_policy(5, 2)).minCoeff(&worst);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TrainConfig cfg;
        cfg.updates = 4;
        cfg.rollout_length = 128;
        cfg.kappa = 10.0;
        cfg.ema_decay = 0.0;
        cfg.seed = seed;
        const TrainResult r = rapo_train(mdp, ens, cfg);
        ASSERT_EQ(r.mixture_history.size(), 4u);
        EXPECT_TRUE(r.mixture_history[0].isApprox(ens.prior));
        Eigen::Index top = 0;
        EXPECT_GT(r.mixture_history[3].maxCoeff(&top), 0.9) << "seed " << seed;
        EXPECT_EQ(top, worst) << "seed " << seed;
    }
}

TEST(Train, SnapshotsAtStartAndEnd)
{
    Small s = small_setup();
    s.cfg.snapshot_every = 4;
    const TrainResult r = rapo_train(s.mdp, s.ens, s.cfg);
    ASSERT_FALSE(r.snapshot_updates.empty());
    EXPECT_EQ(r.snapshot_updates.front(), 0);
    EXPECT_EQ(r.snapshot_updates.back(), s.cfg.updates);
    EXPECT_EQ(r.critic_snapshots.size(), r.snapshot_updates.size());
}

TEST(Train, ExplodingStepThrowsNumericalError)
{
    Small s = small_setup();
    s.cfg.critic_lr = 1e308;
    EXPECT_THROW(rapo_train(s.mdp, s.ens, s.cfg), NumericalError);
}

TEST(Evaluation, WorstCaseIsMinOverModels)
{
    const Small s = small_setup();
    const PolicyTable pi = uniform_policy(s.mdp.n_states, s.mdp.n_actions);
    const VectorXd per = per_model_returns(s.mdp, s.ens, pi);
    for (int k = 0; k < s.ens.size(); ++k) {
        const VectorXd v = oracle::policy_value(s.ens.models[static_cast<std::size_t>(k)], s.mdp.rewards, pi, s.mdp.gamma);
        EXPECT_NEAR(per(k), s.mdp.initial_dist.dot(v), 1e-10);
    }
    EXPECT_EQ(worst_case_return(s.mdp, s.ens, pi), per.minCoeff());
}

TEST(Sweep, Examples)
{
    const TabularMdp mdp = bridge_world(BridgeParams{});
    const RobustViResult vi = value_iteration(mdp);
    const std::vector<PolicyTable> pols{vi.policy};
    const std::vector<SweepRow> one =
        robustness_sweep(pols, mdp, Perturbation::SlipScale, VectorXd::Ones(1));
    ASSERT_EQ(one.size(), 1u);
    EXPECT_NEAR(one[0].mean, expected_return(mdp, vi.v), 1e-9);
    EXPECT_TRUE(robustness_sweep(pols, mdp, Perturbation::SlipScale, VectorXd()).empty());

    const VectorXd grid = VectorXd::LinSpaced(9, 0.0, 2.0);
    const std::vector<SweepRow> rows = robustness_sweep(pols, mdp, Perturbation::SlipScale, grid);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_LE(rows[i].mean, rows[i - 1].mean + 1e-12);
    }
}

TEST(Sweep, IntervalAcrossPolicies)
{
    const TabularMdp mdp = bridge_world(BridgeParams{});
    Rng rng(8);
    std::vector<PolicyTable> pols;
    for (int i = 0; i < 5; ++i) {
        pols.push_back(oracle::random_policy(rng, mdp.n_states, mdp.n_actions));
    }
    const std::vector<SweepRow> rows = robustness_sweep(pols, mdp, Perturbation::SlipScale, VectorXd::Ones(1));
    EXPECT_LT(rows[0].ci_low, rows[0].mean);
    EXPECT_GT(rows[0].ci_high, rows[0].mean);
    EXPECT_NEAR(rows[0].ci_high - rows[0].mean, rows[0].mean - rows[0].ci_low, 1e-12);
}

TEST(Heatmap, HandComputedCell)
{
    const TabularMdp mdp = chain_world(3, 0.3, 0.9);
    const VectorXd critic = (VectorXd(3) << 0.5, 1.0, 4.0).finished();
    const PolicyTable pi = (MatrixXd(3, 2) << 0.25, 0.75, 0.5, 0.5, 1.0, 0.0).finished();
    const Heatmap h = value_heatmap({critic}, {pi}, {7}, mdp, Perturbation::StayScale, VectorXd::Ones(1), {0, 1});
    double expected = 0.0;
    for (int s : {0, 1}) {
        for (int a = 0; a < 2; ++a) {
            expected += 0.5 * pi(s, a) * (mdp.rewards(s, a) + 0.9 * mdp.kernel.row(mdp.row(s, a)).dot(critic));
        }
    }
    ASSERT_EQ(h.values.rows(), 1);
    EXPECT_NEAR(h.values(0, 0), expected, 1e-14);
    EXPECT_EQ(h.updates[0], 7);
}

TEST(Heatmap, IdenticalAndZeroSnapshots)
{
    const TabularMdp mdp = chain_world(4, 0.2, 0.9);
    const VectorXd critic = (VectorXd(4) << 0.1, 0.2, 0.3, 0.4).finished();
    const PolicyTable pi = uniform_policy(4, 2);
    const VectorXd grid = (VectorXd(3) << 0.5, 1.0, 1.5).finished();
    const Heatmap h = value_heatmap({critic, critic}, {pi, pi}, {0, 1}, mdp, Perturbation::StayScale, grid, {0, 1, 2});
    EXPECT_EQ(h.values.row(0), h.values.row(1));

    TabularMdp zero = mdp;
    zero.rewards.setZero();
    const Heatmap z =
        value_heatmap({VectorXd::Zero(4)}, {pi}, {0}, zero, Perturbation::StayScale, grid, {0, 1, 2});
    EXPECT_EQ(z.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ProbeStates, ReachableNonAbsorbing)
{
    const TabularMdp mdp = bridge_world(BridgeParams{});
    const BridgeLayout l = bridge_layout(BridgeParams{});
    const std::vector<int> probes = default_probe_states(mdp);
    EXPECT_NE(std::find(probes.begin(), probes.end(), l.start), probes.end());
    EXPECT_EQ(std::find(probes.begin(), probes.end(), l.terminal), probes.end());
}
