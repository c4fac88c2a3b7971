#ifndef RAPO_ADVNET_HPP
#define RAPO_ADVNET_HPP

#include "rapo/common.hpp"
#include "rapo/kl_dual.hpp"
#include "rapo/rng.hpp"

#include <string>
#include <vector>

namespace rapo
{

inline constexpr int kAdvNetHidden = 32;
inline constexpr double kAdvNetEtaMin = 1e-6;
inline constexpr double kAdvNetEtaMax = 1e3;

/// d -> 32 -> 32 -> 1 with tanh hidden layers and softplus output clamped to [1e-6, 1e3].
/// The same struct carries parameter gradients.
struct AdvNetParams
{
    MatrixXd w1;
    VectorXd b1;
    MatrixXd w2;
    VectorXd b2;
    MatrixXd w3;
    VectorXd b3;

    static AdvNetParams zeros(int input_dim);
    /// Glorot-uniform weights, zero biases.
    static AdvNetParams glorot(int input_dim, Rng& rng);

    int input_dim() const { return static_cast<int>(w1.cols()); }
    Eigen::Index size() const;
    VectorXd flatten() const;
    void unflatten(const VectorXd& flat);
    AdvNetParams zeros_like() const { return zeros(input_dim()); }
    bool all_finite() const { return flatten().allFinite(); }
};

struct AdvNetCache
{
    MatrixXd x;
    MatrixXd h1;
    MatrixXd h2;
    VectorXd pre;
    VectorXd eta;
    /// 1 where the clamp is inactive.
    VectorXd pass;
};

/// One eta per feature row.
VectorXd advnet_forward(const AdvNetParams& params, const MatrixXd& features);
VectorXd advnet_forward(const AdvNetParams& params, const MatrixXd& features, AdvNetCache& cache);

/// Reverse accumulation of dL/deta (length B) into parameter gradients.
AdvNetParams advnet_backward(const AdvNetParams& params, const AdvNetCache& cache, const VectorXd& dloss_deta);

/// One-hot encoding of (s, a) pairs, or of s alone when include_action is false.
MatrixXd encode_state_action(const std::vector<int>& states, const std::vector<int>& actions, int n_states,
                             int n_actions, bool include_action = true);

enum class ProjectionStatus
{
    Tight,
    Degenerate,
    BudgetExceedsMax,
    NotConverged,
    ZeroBudget
};

const char* to_string(ProjectionStatus s);

struct Projection
{
    double eta = 0.0;
    double kl = 0.0;
    int iterations = 0;
    ProjectionStatus status = ProjectionStatus::Tight;
};

struct ProjectionConfig
{
    double tol = 1e-8;
    int max_iter = 100;
    double eta_min = kAdvNetEtaMin;
    double eta_max = kAdvNetEtaMax;
    /// Start from the predicted eta and grow or shrink the bracket by factors of 2.
    bool warm_start = true;
};

/// eta on a uniform-base row with empirical KL <= epsilon + tol, equal to epsilon within tol when tight.
/// Constant rows return eta_max flagged Degenerate; epsilon = 0 returns eta = 0.
Projection project_eta_to_budget(const VectorXd& row, double eta_init, double epsilon,
                                 const ProjectionConfig& cfg = {});

/// Forward value eta_star; d(eta_tilde)/d(eta_pred) = 1.
struct StraightThrough
{
    double value = 0.0;
    double d_pred = 1.0;
};

StraightThrough straight_through(double eta_pred, double eta_star);

/// -(1/eta) log mean_j e^{-eta V_j} - epsilon/eta (offset drops the last term).
/// eta = 0 gives the mean when there is no offset term; with offset and epsilon > 0 it throws DomainError.
double robust_dual_value(const VectorXd& row, double eta_tilde, double epsilon, bool offset = true);

/// d robust_dual_value / d eta = (epsilon - KL) / eta^2 (offset) or -KL / eta^2.
double robust_dual_value_derivative(const VectorXd& row, double eta, double epsilon, bool offset = true);

/// y = r + gamma (1 - d) v_rob.
VectorXd robust_targets(const VectorXd& rewards, const VectorXd& done_flags, double gamma, const VectorXd& v_rob);

struct TargetBatch
{
    VectorXd rewards;
    VectorXd done_flags;
    MatrixXd next_value_matrix;
    MatrixXd features;

    Eigen::Index size() const { return rewards.size(); }
    void validate() const;
};

struct AdvNetLossConfig
{
    double epsilon = 0.1;
    double gamma = 0.99;
    double lambda_kl = 1.0;
    /// Weight on E[(eta_pred - eta*)^2], the supervised pull toward the projected temperature.
    double lambda_sup = 1.0;
    bool offset = true;
    ProjectionConfig projection;
};

struct AdvNetDiagnostics
{
    double mean_eta = 0.0;
    double mean_kl = 0.0;
    double mean_v_rob = 0.0;
    double mean_eta_pred = 0.0;
    double mean_abs_eta_error = 0.0;
    int degenerate_rows = 0;
    int projection_iterations = 0;
};

struct AdvNetEvaluation
{
    double loss = 0.0;
    double target_term = 0.0;
    double kl_term = 0.0;
    double sup_term = 0.0;
    VectorXd eta_pred;
    VectorXd eta_star;
    VectorXd eta_tilde;
    VectorXd v_rob;
    VectorXd y;
    VectorXd kl;
    std::vector<bool> degenerate;
    AdvNetDiagnostics diagnostics;
};

struct AdvNetLossGrads
{
    AdvNetEvaluation eval;
    AdvNetParams grads;
};

/// Forward pass eta_pred -> eta* -> eta_tilde -> v_rob -> y and the loss
///   mean(y) + lambda_kl mean((KL(eta_tilde) - eps)_+^2) + lambda_sup mean((eta_pred - eta*)^2).
/// Gradients flow only through eta_pred (eta* is a constant by straight-through); degenerate rows
/// use v_rob = row mean, contribute nothing to the penalty terms and are detached.
AdvNetLossGrads advnet_loss_and_grads(const AdvNetParams& params, const TargetBatch& batch,
                                      const AdvNetLossConfig& cfg);

/// The loss with eta* and the straight-through anchor eta_pred0 frozen:
/// eta_tilde(psi) = eta* - eta_pred0 + eta_pred(psi). Its gradient at psi0 is the one returned by
/// advnet_loss_and_grads; exposed for finite-difference checks.
double advnet_frozen_loss(const AdvNetParams& params, const TargetBatch& batch, const AdvNetLossConfig& cfg,
                          const VectorXd& eta_star, const VectorXd& eta_pred_anchor,
                          const std::vector<bool>& degenerate);

/// Adaptive moment state. Decays 0.9 / 0.999, denominator guard 1e-8, bias-corrected.
struct Adam
{
    double beta1 = 0.9;
    double beta2 = 0.999;
    double guard = 1e-8;
    long step_count = 0;
    VectorXd m;
    VectorXd v;

    /// theta <- theta - lr * mhat / (sqrt(vhat) + guard).
    void step(VectorXd& theta, const VectorXd& grad, double lr);
};

struct AdvNetUpdateResult
{
    AdvNetParams params;
    AdvNetEvaluation last;
};

/// `steps` Adam iterations on the same batch. The optimizer state persists across calls.
AdvNetUpdateResult advnet_update(const AdvNetParams& params, const TargetBatch& batch, const AdvNetLossConfig& cfg,
                                 int steps, double step_size, Adam& opt);

/// Same with a fresh optimizer.
AdvNetParams advnet_update(const AdvNetParams& params, const TargetBatch& batch, double epsilon, double lambda_kl,
                           int steps, double step_size);

struct QuadraticProbe
{
    double eta_star = 0.0;
    std::vector<double> delta;
    std::vector<double> gap;
    double slope = 0.0;
};

/// phi(eta*) - phi(eta* + delta) for each delta in delta_grid, with the log-log slope of gap against abs(delta).
QuadraticProbe quadratic_error_probe(const ValueSamples<double>& samples, double epsilon,
                                     const std::vector<double>& delta_grid);

} // namespace rapo

#endif
