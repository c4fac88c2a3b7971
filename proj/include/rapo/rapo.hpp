#ifndef RAPO_RAPO_HPP
#define RAPO_RAPO_HPP

#include "rapo/advnet.hpp"
#include "rapo/ensemble.hpp"
#include "rapo/mdp.hpp"
#include "rapo/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rapo
{

struct TrainConfig
{
    int updates = 200;
    int rollout_length = 512;
    int episode_horizon = 64;
    double epsilon = 0.1;
    double kappa = 0.1;
    int samples_m = 8;
    double gamma = 0.9;
    double gae_lambda = 0.95;
    double clip = 0.2;
    double actor_lr = 0.05;
    double critic_lr = 0.05;
    int epochs = 4;
    int minibatches = 4;
    double entropy_coef = 0.0;
    double value_coef = 0.5;
    bool normalize_advantages = true;

    bool use_advnet = true;
    bool use_reweighting = true;
    int advnet_steps = 5;
    double advnet_lr = 1e-3;
    double lambda_kl = 1.0;
    double lambda_sup = 1.0;
    bool advnet_state_only = false;
    bool advnet_offset = true;
    double projection_tol = 1e-8;
    int projection_max_iter = 100;
    /// Iteration cap of the cold bisection that replaces AdvNet in the ablation.
    int bisection_iters = 8;

    double beta_max = 1e3;
    double reweight_tol = 1e-10;
    double ema_decay = 0.9;
    int scorer_samples = 0;
    bool chain_from_previous = false;

    int snapshot_every = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Tabular actor (row-softmax logits) and table critic.
struct SoftmaxPolicy
{
    MatrixXd logits;
    VectorXd critic;

    static SoftmaxPolicy zeros(int n_states, int n_actions);
    PolicyTable probs() const;
    VectorXd action_probs(int s) const;
};

struct RolloutBuffer
{
    std::vector<int> states;
    std::vector<int> actions;
    std::vector<int> next_states;
    std::vector<double> rewards;
    /// Transition into an absorbing state.
    std::vector<double> done_flags;
    /// Episode ended here (absorbing or horizon).
    std::vector<double> episode_end;
    std::vector<double> log_probs;
    std::vector<double> value_estimates;
    /// Undiscounted returns of episodes that finished inside the buffer.
    std::vector<double> episode_returns;

    std::size_t size() const { return states.size(); }
};

/// On-policy rollout under `env`, reset to the initial distribution at each episode end.
RolloutBuffer collect_rollout(const TabularMdp& env, const SoftmaxPolicy& policy, int length, Rng& rng,
                              int episode_horizon = 64);

struct Gae
{
    VectorXd advantages;
    VectorXd returns;
};

/// delta_t = r_t + gamma (1 - d_t) V_{t+1} - V_t, A_t = delta_t + gamma lambda (1 - d_t) A_{t+1};
/// V_{T} = next_value.
Gae gae(const VectorXd& rewards, const VectorXd& values, double next_value, const VectorXd& done_flags, double gamma,
        double lambda);

/// Same recursion with externally supplied TD residuals; the chain is cut where episode_end = 1.
Gae gae_from_deltas(const VectorXd& deltas, const VectorXd& values, const VectorXd& episode_end, double gamma,
                    double lambda);

struct PpoConfig
{
    double clip = 0.2;
    int epochs = 4;
    int minibatches = 4;
    double actor_lr = 0.05;
    double critic_lr = 0.05;
    double entropy_coef = 0.0;
    double value_coef = 0.5;
    bool normalize_advantages = true;
};

struct PpoStats
{
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double entropy = 0.0;
    double total_loss = 0.0;
    double clip_fraction = 0.0;
};

struct PpoOptimizer
{
    Adam actor;
    Adam critic;
};

/// Clipped-surrogate actor step and squared-error critic step with closed-form tabular gradients.
/// Losses are averaged over every minibatch step, measured before the step.
PpoStats ppo_update(SoftmaxPolicy& policy, const RolloutBuffer& buffer, const VectorXd& advantages,
                    const VectorXd& returns, const PpoConfig& cfg, Rng& rng, PpoOptimizer& opt,
                    const std::vector<bool>& frozen_states = {});

struct UpdateMetrics
{
    int update = 0;
    double w_entropy = 0.0;
    double kl_w = 0.0;
    double beta = 0.0;
    double mean_eta = 0.0;
    double mean_target_kl = 0.0;
    double max_target_kl = 0.0;
    double mean_v_rob = 0.0;
    double mean_target = 0.0;
    double advnet_loss = 0.0;
    double advnet_eta_error = 0.0;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double total_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double mean_episode_return = 0.0;
    int episodes = 0;
};

/// Throws NumericalError naming the first non-finite field.
void check_finite(const UpdateMetrics& m);

enum class TargetMode
{
    /// y = r + gamma (1 - d) v_rob with the robust dual value.
    Robust,
    /// y = r + gamma (1 - d) mean of V over the sampled successors.
    Expectation
};

struct TrainResult
{
    SoftmaxPolicy policy;
    AdvNetParams advnet;
    std::vector<VectorXd> mixture_history;
    std::vector<UpdateMetrics> metrics;
    std::vector<int> snapshot_updates;
    std::vector<VectorXd> critic_snapshots;
    std::vector<PolicyTable> policy_snapshots;
};

using MetricsCallback = std::function<void(const UpdateMetrics&)>;

/// The robust actor-critic loop: nominal rollouts, mixture-sampled successors, AdvNet (or bounded
/// bisection) robust targets, PPO on robust GAE, then Boltzmann reweighting for the next update.
/// use_advnet = use_reweighting = false drops the trajectory tilt too and trains on plain
/// expectation targets under the prior mixture.
TrainResult rapo_train(const TabularMdp& nominal, const EnsembleSpec& ensemble, const TrainConfig& cfg,
                       const MetricsCallback& on_update = {});

/// rapo_train with the two adversaries toggled.
TrainResult ablation_variant(const TabularMdp& nominal, const EnsembleSpec& ensemble, TrainConfig cfg,
                             bool use_advnet, bool use_reweighting, const MetricsCallback& on_update = {});

/// PPO whose critic targets are expectation targets over successors sampled from the prior mixture.
/// A one-model ensemble {nominal} gives nominal-only PPO.
TrainResult ppo_train(const TabularMdp& nominal, const EnsembleSpec& ensemble, const TrainConfig& cfg,
                      const MetricsCallback& on_update = {});

/// mu0 . V^pi under each ensemble model, exactly.
VectorXd per_model_returns(const TabularMdp& nominal, const EnsembleSpec& ensemble, const PolicyTable& policy);

double worst_case_return(const TabularMdp& nominal, const EnsembleSpec& ensemble, const PolicyTable& policy);

struct SweepRow
{
    double scale = 0.0;
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

/// Exact return of each policy under each scaled kernel; mean and normal 95% interval across policies.
std::vector<SweepRow> robustness_sweep(const std::vector<PolicyTable>& policies, const TabularMdp& nominal,
                                       Perturbation family, const VectorXd& scale_grid);

struct Heatmap
{
    std::vector<int> updates;
    VectorXd scales;
    /// values(u, j) = V_u(scales(j)).
    MatrixXd values;
    std::vector<int> argmax;

    double floor(int row) const { return values.row(row).minCoeff(); }
};

/// V_u(alpha) = mean over probe states s of sum_a pi_u(a|s) (r(s,a) + gamma sum_s' p_alpha(s'|s,a) V_u(s')).
Heatmap value_heatmap(const std::vector<VectorXd>& critics, const std::vector<PolicyTable>& policies,
                      const std::vector<int>& updates, const TabularMdp& nominal, Perturbation family,
                      const VectorXd& scale_grid, const std::vector<int>& probe_states);

/// Non-absorbing states reachable from the initial distribution under some action sequence.
std::vector<int> default_probe_states(const TabularMdp& mdp);

} // namespace rapo

#endif
