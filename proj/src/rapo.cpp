#include "rapo/rapo.hpp"

#include "rapo/boltzmann.hpp"
#include "rapo/robust_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace rapo
{

void TrainConfig::validate() const
{
    auto need = [](bool ok, const char* what) {
        if (!ok) {
            throw ConfigError(std::string("train config: ") + what);
        }
    };
    need(updates >= 0, "updates must be nonnegative");
    need(rollout_length > 0, "rollout_length must be positive");
    need(episode_horizon > 0, "episode_horizon must be positive");
    need(epsilon >= 0.0 && std::isfinite(epsilon), "epsilon must be finite and nonnegative");
    need(kappa >= 0.0 && std::isfinite(kappa), "kappa must be finite and nonnegative");
    need(samples_m > 0, "samples_m must be positive");
    need(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
    need(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
    need(clip > 0.0 && clip < 1.0, "clip must lie in (0, 1)");
    need(actor_lr > 0.0 && critic_lr > 0.0 && advnet_lr > 0.0, "learning rates must be positive");
    need(epochs > 0 && minibatches > 0, "epochs and minibatches must be positive");
    need(minibatches <= rollout_length, "minibatches cannot exceed rollout_length");
    need(entropy_coef >= 0.0 && value_coef >= 0.0, "loss coefficients must be nonnegative");
    need(advnet_steps >= 0, "advnet_steps must be nonnegative");
    need(lambda_kl >= 0.0 && lambda_sup >= 0.0, "lambda_kl and lambda_sup must be nonnegative");
    need(projection_tol > 0.0 && projection_max_iter > 0, "projection tolerance and iterations must be positive");
    need(bisection_iters > 0, "bisection_iters must be positive");
    need(beta_max > 0.0 && reweight_tol > 0.0, "beta_max and reweight_tol must be positive");
    need(ema_decay >= 0.0 && ema_decay < 1.0, "ema_decay must lie in [0, 1)");
    need(scorer_samples >= 0, "scorer_samples must be nonnegative");
    need(snapshot_every > 0, "snapshot_every must be positive");
}

SoftmaxPolicy SoftmaxPolicy::zeros(int n_states, int n_actions)
{
    return {MatrixXd::Zero(n_states, n_actions), VectorXd::Zero(n_states)};
}

VectorXd SoftmaxPolicy::action_probs(int s) const
{
    const VectorXd row = logits.row(s).transpose();
    const VectorXd e = (row.array() - row.maxCoeff()).exp();
    return e / e.sum();
}

PolicyTable SoftmaxPolicy::probs() const
{
    PolicyTable p(logits.rows(), logits.cols());
    for (Eigen::Index s = 0; s < logits.rows(); ++s) {
        p.row(s) = action_probs(static_cast<int>(s)).transpose();
    }
    return p;
}

RolloutBuffer collect_rollout(const TabularMdp& env, const SoftmaxPolicy& policy, int length, Rng& rng,
                              int episode_horizon)
{
    if (length < 0 || episode_horizon <= 0) {
        throw ConfigError("collect_rollout: length must be nonnegative and the horizon positive");
    }
    RolloutBuffer buf;
    if (length == 0) {
        return buf;
    }
    const std::vector<bool> absorbing = env.absorbing();
    int s = static_cast<int>(rng.categorical(env.initial_dist));
    int steps = 0;
    double ep_return = 0.0;
    for (int i = 0; i < length; ++i) {
        const VectorXd probs = policy.action_probs(s);
        const int a = static_cast<int>(rng.categorical(probs));
        const int next = static_cast<int>(rng.categorical(env.kernel.row(env.row(s, a))));
        const double r = env.rewards(s, a);
        const bool done = absorbing[static_cast<std::size_t>(next)];
        ++steps;
        ep_return += r;
        const bool end = done || steps >= episode_horizon;

        buf.states.push_back(s);
        buf.actions.push_back(a);
        buf.next_states.push_back(next);
        buf.rewards.push_back(r);
        buf.done_flags.push_back(done ? 1.0 : 0.0);
        buf.episode_end.push_back(end ? 1.0 : 0.0);
        buf.log_probs.push_back(std::log(probs(a)));
        buf.value_estimates.push_back(policy.critic(s));

        if (end) {
            buf.episode_returns.push_back(ep_return);
            s = static_cast<int>(rng.categorical(env.initial_dist));
            steps = 0;
            ep_return = 0.0;
        }
        else {
            s = next;
        }
    }
    return buf;
}

Gae gae(const VectorXd& rewards, const VectorXd& values, double next_value, const VectorXd& done_flags, double gamma,
        double lambda)
{
    const Eigen::Index T = rewards.size();
    if (values.size() != T || done_flags.size() != T) {
        throw DomainError("gae: length mismatch");
    }
    Gae out{VectorXd::Zero(T), VectorXd::Zero(T)};
    double carry = 0.0;
    for (Eigen::Index t = T - 1; t >= 0; --t) {
        const double v_next = t + 1 < T ? values(t + 1) : next_value;
        const double live = 1.0 - done_flags(t);
        const double delta = rewards(t) + gamma * live * v_next - values(t);
        carry = delta + gamma * lambda * live * carry;
        out.advantages(t) = carry;
    }
    out.returns = out.advantages + values;
    return out;
}

Gae gae_from_deltas(const VectorXd& deltas, const VectorXd& values, const VectorXd& episode_end, double gamma,
                    double lambda)
{
    const Eigen::Index T = deltas.size();
    if (values.size() != T || episode_end.size() != T) {
        throw DomainError("gae_from_deltas: length mismatch");
    }
    Gae out{VectorXd::Zero(T), VectorXd::Zero(T)};
    double carry = 0.0;
    for (Eigen::Index t = T - 1; t >= 0; --t) {
        carry = deltas(t) + gamma * lambda * (1.0 - episode_end(t)) * carry;
        out.advantages(t) = carry;
    }
    out.returns = out.advantages + values;
    return out;
}

PpoStats ppo_update(SoftmaxPolicy& policy, const RolloutBuffer& buffer, const VectorXd& advantages,
                    const VectorXd& returns, const PpoConfig& cfg, Rng& rng, PpoOptimizer& opt,
                    const std::vector<bool>& frozen_states)
{
    const auto N = static_cast<Eigen::Index>(buffer.size());
    if (advantages.size() != N || returns.size() != N) {
        throw DomainError("ppo_update: advantages and returns must match the buffer length");
    }
    PpoStats stats;
    if (N == 0) {
        return stats;
    }
    VectorXd adv = advantages;
    if (cfg.normalize_advantages && N > 1) {
        const double mean = adv.mean();
        const double sd = std::sqrt((adv.array() - mean).square().mean());
        adv = (adv.array() - mean) / (sd + 1e-8);
    }
    const Eigen::Index S = policy.logits.rows();
    const Eigen::Index A = policy.logits.cols();

    std::vector<std::size_t> idx(static_cast<std::size_t>(N));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto mb_count = static_cast<std::size_t>(cfg.minibatches);
    int steps = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(idx);
        for (std::size_t mb = 0; mb < mb_count; ++mb) {
            const std::size_t lo = mb * idx.size() / mb_count;
            const std::size_t hi = (mb + 1) * idx.size() / mb_count;
            if (hi <= lo) {
                continue;
            }
            const double inv = 1.0 / static_cast<double>(hi - lo);
            const PolicyTable pi = policy.probs();
            MatrixXd g_logits = MatrixXd::Zero(S, A);
            VectorXd g_critic = VectorXd::Zero(S);
            double actor_loss = 0.0;
            double critic_loss = 0.0;
            double entropy = 0.0;
            double clipped = 0.0;
            for (std::size_t k = lo; k < hi; ++k) {
                const std::size_t i = idx[k];
                const int s = buffer.states[i];
                const int a = buffer.actions[i];
                const double A_i = adv(static_cast<Eigen::Index>(i));
                const double ratio = std::exp(std::log(pi(s, a)) - buffer.log_probs[i]);
                const double surr1 = ratio * A_i;
                const double surr2 = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * A_i;
                actor_loss -= std::min(surr1, surr2) * inv;
                if (std::abs(ratio - 1.0) > cfg.clip) {
                    clipped += inv;
                }
                if (surr1 <= surr2) {
                    for (Eigen::Index b = 0; b < A; ++b) {
                        g_logits(s, b) -= A_i * ratio * ((b == a ? 1.0 : 0.0) - pi(s, b)) * inv;
                    }
                }
                double h = 0.0;
                for (Eigen::Index b = 0; b < A; ++b) {
                    if (pi(s, b) > 0.0) {
                        h -= pi(s, b) * std::log(pi(s, b));
                    }
                }
                entropy += h * inv;
                if (cfg.entropy_coef > 0.0) {
                    for (Eigen::Index b = 0; b < A; ++b) {
                        const double lp = pi(s, b) > 0.0 ? std::log(pi(s, b)) : 0.0;
                        g_logits(s, b) += cfg.entropy_coef * pi(s, b) * (lp + h) * inv;
                    }
                }
                const double diff = policy.critic(s) - returns(static_cast<Eigen::Index>(i));
                critic_loss += 0.5 * diff * diff * inv;
                if (frozen_states.empty() || !frozen_states[static_cast<std::size_t>(s)]) {
                    g_critic(s) += diff * inv;
                }
            }
            stats.actor_loss += actor_loss;
            stats.critic_loss += critic_loss;
            stats.entropy += entropy;
            stats.clip_fraction += clipped;
            ++steps;

            Eigen::Map<VectorXd> theta(policy.logits.data(), policy.logits.size());
            VectorXd flat_theta = theta;
            opt.actor.step(flat_theta, Eigen::Map<const VectorXd>(g_logits.data(), g_logits.size()), cfg.actor_lr);
            theta = flat_theta;
            opt.critic.step(policy.critic, g_critic, cfg.critic_lr);
        }
    }
    if (steps > 0) {
        stats.actor_loss /= steps;
        stats.critic_loss /= steps;
        stats.entropy /= steps;
        stats.clip_fraction /= steps;
    }
    stats.total_loss = stats.actor_loss + cfg.value_coef * stats.critic_loss - cfg.entropy_coef * stats.entropy;
    return stats;
}

void check_finite(const UpdateMetrics& m)
{
    const std::pair<const char*, double> fields[] = {
        {"w_entropy", m.w_entropy},       {"kl_w", m.kl_w},
        {"beta", m.beta},                 {"mean_eta", m.mean_eta},
        {"mean_target_kl", m.mean_target_kl}, {"max_target_kl", m.max_target_kl},
        {"mean_v_rob", m.mean_v_rob},     {"mean_target", m.mean_target},
        {"advnet_loss", m.advnet_loss},   {"advnet_eta_error", m.advnet_eta_error},
        {"actor_loss", m.actor_loss},     {"critic_loss", m.critic_loss},
        {"total_loss", m.total_loss},     {"entropy", m.entropy},
        {"clip_fraction", m.clip_fraction}, {"mean_episode_return", m.mean_episode_return},
    };
    for (const auto& [name, value] : fields) {
        if (!std::isfinite(value)) {
            throw NumericalError("update " + std::to_string(m.update) + ": metric " + name + " is " +
                                 std::to_string(value));
        }
    }
}

namespace
{

TrainResult train_loop(const TabularMdp& nominal, const EnsembleSpec& ensemble, const TrainConfig& cfg,
                       TargetMode mode, bool use_advnet, bool use_reweighting, const MetricsCallback& on_update)
{
    nominal.validate();
    ensemble.validate();
    cfg.validate();
    if (ensemble.n_states != nominal.n_states || ensemble.n_actions != nominal.n_actions) {
        throw DomainError("train: ensemble and nominal MDP differ in shape");
    }
    const int S = nominal.n_states;
    const int A = nominal.n_actions;
    const std::vector<bool> absorbing = nominal.absorbing();

    Rng root(cfg.seed);
    Rng rollout_rng = root.split(1);
    Rng sample_rng = root.split(2);
    Rng ppo_rng = root.split(3);
    Rng init_rng = root.split(4);
    Rng score_rng = root.split(5);

    TrainResult res;
    res.policy = SoftmaxPolicy::zeros(S, A);
    const int input_dim = cfg.advnet_state_only ? S : S + A;
    if (use_advnet) {
        res.advnet = AdvNetParams::glorot(input_dim, init_rng);
    }
    Adam advnet_opt;
    PpoOptimizer ppo_opt;
    PpoConfig ppo_cfg;
    ppo_cfg.clip = cfg.clip;
    ppo_cfg.epochs = cfg.epochs;
    ppo_cfg.minibatches = cfg.minibatches;
    ppo_cfg.actor_lr = cfg.actor_lr;
    ppo_cfg.critic_lr = cfg.critic_lr;
    ppo_cfg.entropy_coef = cfg.entropy_coef;
    ppo_cfg.value_coef = cfg.value_coef;
    ppo_cfg.normalize_advantages = cfg.normalize_advantages;

    AdvNetLossConfig loss_cfg;
    loss_cfg.epsilon = cfg.epsilon;
    loss_cfg.gamma = cfg.gamma;
    loss_cfg.lambda_kl = cfg.lambda_kl;
    loss_cfg.lambda_sup = cfg.lambda_sup;
    loss_cfg.offset = cfg.advnet_offset;
    loss_cfg.projection.tol = cfg.projection_tol;
    loss_cfg.projection.max_iter = cfg.projection_max_iter;

    ProjectionConfig bisect_cfg;
    bisect_cfg.tol = cfg.projection_tol;
    bisect_cfg.max_iter = cfg.bisection_iters;
    bisect_cfg.warm_start = false;

    const VectorXd& prior = ensemble.prior;
    VectorXd w = prior;
    MixtureWeights<double> mix;
    mix.weights = prior;
    VulnerabilityScores scores;
    bool have_scores = false;

    auto snapshot = [&](int u) {
        res.snapshot_updates.push_back(u);
        res.critic_snapshots.push_back(res.policy.critic);
        res.policy_snapshots.push_back(res.policy.probs());
    };
    snapshot(0);

    for (int u = 1; u <= cfg.updates; ++u) {
        const RolloutBuffer buf = collect_rollout(nominal, res.policy, cfg.rollout_length, rollout_rng,
                                                  cfg.episode_horizon);
        const auto B = static_cast<Eigen::Index>(buf.size());
        UpdateMetrics m;
        m.update = u;
        m.w_entropy = weights_entropy(w);
        m.kl_w = kl_to_base(w, prior);
        m.beta = mix.beta;
        res.mixture_history.push_back(w);

        MatrixXd next_values(B, cfg.samples_m);
        VectorXd done = VectorXd::Zero(B);
        VectorXd rewards(B);
        for (Eigen::Index t = 0; t < B; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            rewards(t) = buf.rewards[ti];
            const std::vector<int> nxt =
                sample_next_states(ensemble, w, buf.states[ti], buf.actions[ti], cfg.samples_m, sample_rng);
            bool all_absorbing = true;
            for (int j = 0; j < cfg.samples_m; ++j) {
                const int sp = nxt[static_cast<std::size_t>(j)];
                next_values(t, j) = res.policy.critic(sp);
                all_absorbing = all_absorbing && absorbing[static_cast<std::size_t>(sp)];
            }
            done(t) = all_absorbing ? 1.0 : 0.0;
        }

        VectorXd v_rob(B);
        VectorXd row_kl = VectorXd::Zero(B);
        VectorXd row_eta = VectorXd::Zero(B);
        Eigen::Index active_rows = 0;
        if (mode == TargetMode::Expectation) {
            for (Eigen::Index t = 0; t < B; ++t) {
                const VectorXd row = next_values.row(t).transpose();
                v_rob(t) = row.mean();
            }
        }
        else if (use_advnet) {
            TargetBatch batch;
            batch.rewards = rewards;
            batch.done_flags = done;
            batch.next_value_matrix = next_values;
            batch.features = encode_state_action(buf.states, buf.actions, S, A, !cfg.advnet_state_only);
            AdvNetUpdateResult up =
                advnet_update(res.advnet, batch, loss_cfg, cfg.advnet_steps, cfg.advnet_lr, advnet_opt);
            res.advnet = std::move(up.params);
            v_rob = up.last.v_rob;
            row_kl = up.last.kl;
            row_eta = up.last.eta_tilde;
            for (Eigen::Index t = 0; t < B; ++t) {
                if (up.last.degenerate[static_cast<std::size_t>(t)]) {
                    row_eta(t) = 0.0;
                }
                else {
                    ++active_rows;
                }
            }
            m.advnet_loss = up.last.loss;
            m.advnet_eta_error = up.last.diagnostics.mean_abs_eta_error;
        }
        else {
            for (Eigen::Index t = 0; t < B; ++t) {
                const VectorXd row = next_values.row(t).transpose();
                const Projection p = project_eta_to_budget(row, 0.0, cfg.epsilon, bisect_cfg);
                if (p.status == ProjectionStatus::ZeroBudget || p.status == ProjectionStatus::Degenerate) {
                    v_rob(t) = row.mean();
                    continue;
                }
                v_rob(t) = robust_dual_value(row, p.eta, cfg.epsilon, cfg.advnet_offset);
                row_kl(t) = p.kl;
                row_eta(t) = p.eta;
                ++active_rows;
            }
        }
        const VectorXd y = robust_targets(rewards, done, cfg.gamma, v_rob);
        // eta is averaged over rows with a live dual; degenerate rows carry no temperature
        m.mean_eta = active_rows > 0 ? row_eta.sum() / static_cast<double>(active_rows) : 0.0;
        m.mean_target_kl = B > 0 ? row_kl.mean() : 0.0;
        m.max_target_kl = B > 0 ? row_kl.maxCoeff() : 0.0;
        m.mean_v_rob = B > 0 ? v_rob.mean() : 0.0;
        m.mean_target = B > 0 ? y.mean() : 0.0;

        const VectorXd values = Eigen::Map<const VectorXd>(buf.value_estimates.data(), B);
        const VectorXd ends = Eigen::Map<const VectorXd>(buf.episode_end.data(), B);
        const Gae g = gae_from_deltas(y - values, values, ends, cfg.gamma, cfg.gae_lambda);
        const PpoStats ps = ppo_update(res.policy, buf, g.advantages, g.returns, ppo_cfg, ppo_rng, ppo_opt, absorbing);
        if (!res.policy.logits.allFinite() || !res.policy.critic.allFinite() ||
            (use_advnet && !res.advnet.all_finite())) {
            throw NumericalError("update " + std::to_string(u) + ": non-finite policy, critic or AdvNet parameters");
        }
        m.actor_loss = ps.actor_loss;
        m.critic_loss = ps.critic_loss;
        m.total_loss = ps.total_loss;
        m.entropy = ps.entropy;
        m.clip_fraction = ps.clip_fraction;
        m.episodes = static_cast<int>(buf.episode_returns.size());
        if (!buf.episode_returns.empty()) {
            m.mean_episode_return = std::accumulate(buf.episode_returns.begin(), buf.episode_returns.end(), 0.0) /
                                    static_cast<double>(buf.episode_returns.size());
        }

        if (use_reweighting) {
            std::vector<std::pair<int, int>> pairs;
            pairs.reserve(buf.size());
            for (std::size_t t = 0; t < buf.size(); ++t) {
                pairs.emplace_back(buf.states[t], buf.actions[t]);
            }
            scores = score_models(res.policy.critic, ensemble, pairs, cfg.scorer_samples, score_rng, cfg.ema_decay,
                                  have_scores ? &scores : nullptr);
            have_scores = true;
            const VectorXd base = cfg.chain_from_previous ? w : prior;
            mix = solve_beta(base, scores.scores, cfg.kappa, cfg.reweight_tol, cfg.beta_max);
            w = mix.weights;
        }

        check_finite(m);
        res.metrics.push_back(m);
        if (on_update) {
            on_update(m);
        }
        if (u % cfg.snapshot_every == 0 || u == cfg.updates) {
            snapshot(u);
        }
    }
    return res;
}

} // namespace

TrainResult rapo_train(const TabularMdp& nominal, const EnsembleSpec& ensemble, const TrainConfig& cfg,
                       const MetricsCallback& on_update)
{
    return ablation_variant(nominal, ensemble, cfg, cfg.use_advnet, cfg.use_reweighting, on_update);
}

TrainResult ablation_variant(const TabularMdp& nominal, const EnsembleSpec& ensemble, TrainConfig cfg,
                             bool use_advnet, bool use_reweighting, const MetricsCallback& on_update)
{
    cfg.use_advnet = use_advnet;
    cfg.use_reweighting = use_reweighting;
    const TargetMode mode = use_advnet || use_reweighting ? TargetMode::Robust : TargetMode::Expectation;
    return train_loop(nominal, ensemble, cfg, mode, use_advnet, use_reweighting, on_update);
}

TrainResult ppo_train(const TabularMdp& nominal, const EnsembleSpec& ensemble, const TrainConfig& cfg,
                      const MetricsCallback& on_update)
{
    return train_loop(nominal, ensemble, cfg, TargetMode::Expectation, false, false, on_update);
}

VectorXd per_model_returns(const TabularMdp& nominal, const EnsembleSpec& ensemble, const PolicyTable& policy)
{
    VectorXd out(ensemble.size());
    for (int k = 0; k < ensemble.size(); ++k) {
        const ValueFn v = nominal_policy_evaluation(ensemble.models[static_cast<std::size_t>(k)], nominal.rewards,
                                                    policy, nominal.gamma);
        out(k) = nominal.initial_dist.dot(v);
    }
    return out;
}

double worst_case_return(const TabularMdp& nominal, const EnsembleSpec& ensemble, const PolicyTable& policy)
{
    return per_model_returns(nominal, ensemble, policy).minCoeff();
}

std::vector<SweepRow> robustness_sweep(const std::vector<PolicyTable>& policies, const TabularMdp& nominal,
                                       Perturbation family, const VectorXd& scale_grid)
{
    if (policies.empty()) {
        throw DomainError("robustness_sweep: need at least one policy");
    }
    std::vector<SweepRow> rows;
    for (Eigen::Index j = 0; j < scale_grid.size(); ++j) {
        const Kernel k = perturb_kernel(nominal.kernel, nominal.n_states, nominal.n_actions, scale_grid(j), family);
        VectorXd returns(static_cast<Eigen::Index>(policies.size()));
        for (std::size_t i = 0; i < policies.size(); ++i) {
            const ValueFn v = nominal_policy_evaluation(k, nominal.rewards, policies[i], nominal.gamma);
            returns(static_cast<Eigen::Index>(i)) = nominal.initial_dist.dot(v);
        }
        SweepRow row;
        row.scale = scale_grid(j);
        row.mean = returns.mean();
        row.ci_low = row.ci_high = row.mean;
        if (returns.size() > 1) {
            const double var = (returns.array() - row.mean).square().sum() / static_cast<double>(returns.size() - 1);
            const double half = 1.96 * std::sqrt(var / static_cast<double>(returns.size()));
            row.ci_low = row.mean - half;
            row.ci_high = row.mean + half;
        }
        rows.push_back(row);
    }
    return rows;
}

Heatmap value_heatmap(const std::vector<VectorXd>& critics, const std::vector<PolicyTable>& policies,
                      const std::vector<int>& updates, const TabularMdp& nominal, Perturbation family,
                      const VectorXd& scale_grid, const std::vector<int>& probe_states)
{
    if (critics.size() != policies.size() || critics.size() != updates.size()) {
        throw DomainError("value_heatmap: critics, policies and update labels differ in count");
    }
    if (probe_states.empty()) {
        throw DomainError("value_heatmap: empty probe batch");
    }
    Heatmap hm;
    hm.updates = updates;
    hm.scales = scale_grid;
    hm.values = MatrixXd::Zero(static_cast<Eigen::Index>(critics.size()), scale_grid.size());
    std::vector<Kernel> kernels;
    for (Eigen::Index j = 0; j < scale_grid.size(); ++j) {
        kernels.push_back(perturb_kernel(nominal.kernel, nominal.n_states, nominal.n_actions, scale_grid(j), family));
    }
    const double inv = 1.0 / static_cast<double>(probe_states.size());
    for (std::size_t u = 0; u < critics.size(); ++u) {
        const VectorXd& v = critics[u];
        const PolicyTable& pi = policies[u];
        for (Eigen::Index j = 0; j < scale_grid.size(); ++j) {
            double acc = 0.0;
            for (int s : probe_states) {
                for (int a = 0; a < nominal.n_actions; ++a) {
                    const double backup =
                        nominal.rewards(s, a) + nominal.gamma * kernels[static_cast<std::size_t>(j)].row(nominal.row(s, a)).dot(v);
                    acc += pi(s, a) * backup;
                }
            }
            hm.values(static_cast<Eigen::Index>(u), j) = acc * inv;
        }
        Eigen::Index best = 0;
        if (scale_grid.size() > 0) {
            hm.values.row(static_cast<Eigen::Index>(u)).maxCoeff(&best);
        }
        hm.argmax.push_back(static_cast<int>(best));
    }
    return hm;
}

std::vector<int> default_probe_states(const TabularMdp& mdp)
{
    const std::vector<bool> absorbing = mdp.absorbing();
    std::vector<bool> seen(static_cast<std::size_t>(mdp.n_states), false);
    std::deque<int> queue;
    for (int s = 0; s < mdp.n_states; ++s) {
        if (mdp.initial_dist(s) > 0.0) {
            seen[static_cast<std::size_t>(s)] = true;
            queue.push_back(s);
        }
    }
    while (!queue.empty()) {
        const int s = queue.front();
        queue.pop_front();
        for (int a = 0; a < mdp.n_actions; ++a) {
            for (int sp = 0; sp < mdp.n_states; ++sp) {
                if (mdp.kernel(mdp.row(s, a), sp) > 0.0 && !seen[static_cast<std::size_t>(sp)]) {
                    seen[static_cast<std::size_t>(sp)] = true;
                    queue.push_back(sp);
                }
            }
        }
    }
    std::vector<int> out;
    for (int s = 0; s < mdp.n_states; ++s) {
        if (seen[static_cast<std::size_t>(s)] && !absorbing[static_cast<std::size_t>(s)]) {
            out.push_back(s);
        }
    }
    return out;
}

} // namespace rapo
