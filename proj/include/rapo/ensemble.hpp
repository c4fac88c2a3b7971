#ifndef RAPO_ENSEMBLE_HPP
#define RAPO_ENSEMBLE_HPP

#include "rapo/mdp.hpp"
#include "rapo/rng.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace rapo
{

/// One-parameter kernel families.
/// SlipScale: every row's non-modal mass (everything off the most likely successor) is multiplied by the scale and the
///   remainder returned to the modal successor.
/// StayScale: the self-transition mass is multiplied by the scale and the remainder spread over the other successors
///   in proportion to their nominal mass.
enum class Perturbation
{
    SlipScale,
    StayScale
};

Perturbation perturbation_from_string(const std::string& name);
const char* to_string(Perturbation p);

struct EnsembleSpec
{
    int n_states = 0;
    int n_actions = 0;
    std::vector<Kernel> models;
    VectorXd scales;
    VectorXd prior;

    int size() const { return static_cast<int>(models.size()); }
    void validate() const;
};

/// Scale 1 returns a bit-identical copy. Throws DomainError when a row would need negative mass.
Kernel perturb_kernel(const Kernel& kernel, int n_states, int n_actions, double scale, Perturbation family);

/// Prior defaults to uniform when empty.
EnsembleSpec build_ensemble(const TabularMdp& nominal, const VectorXd& param_grid, Perturbation family,
                            const VectorXd& prior = VectorXd());

/// sum_k w_k p_k.
Kernel mixture_kernel(const EnsembleSpec& ensemble, const VectorXd& w);

/// m draws of k ~ w then s' ~ p_k(.|s,a).
std::vector<int> sample_next_states(const EnsembleSpec& ensemble, const VectorXd& w, int s, int a, int m, Rng& rng);

struct VulnerabilityScores
{
    VectorXd scores;
    double ema_decay = 0.0;
    int raw_history_len = 0;
};

/// h_k = mean over the batch of E_{s' ~ p_k(.|s,a)} V(s'). scorer_samples = 0 uses the exact
/// expectation; otherwise each (s,a) draws that many successors from model k. With ema_decay > 0
/// and a previous score, h = decay * previous + (1 - decay) * raw.
VulnerabilityScores score_models(const ValueFn& critic, const EnsembleSpec& ensemble,
                                 const std::vector<std::pair<int, int>>& batch, int scorer_samples, Rng& rng,
                                 double ema_decay = 0.0, const VulnerabilityScores* previous = nullptr);

struct FiniteKRow
{
    int k = 0;
    double beta_deviation = 0.0;
    double value_gap = 0.0;
};

struct FiniteKTable
{
    std::vector<FiniteKRow> rows;
    double beta_ref = 0.0;
    double value_ref = 0.0;
    bool degenerate = false;
    double beta_slope = 0.0;
    double gap_slope = 0.0;
};

/// For each K: draw K scores, solve the kappa-ball reweighting under a uniform prior, and compare
/// against the reference solution on k_ref draws. beta_deviation = mean |beta_K - beta_ref|;
/// value_gap = mean of Phi_ref(beta_ref) - Phi_ref(beta_K), the reference dual objective lost by
/// using the finite-K temperature. Slopes are least-squares fits in log-log.
FiniteKTable finite_k_convergence(const std::function<double(Rng&)>& score_sampler, const std::vector<int>& k_grid,
                                  double kappa, int trials, Rng& rng, int k_ref = 1000000);

/// Least-squares slope of log(y) on log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace rapo

#endif
