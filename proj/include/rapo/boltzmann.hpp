#ifndef RAPO_BOLTZMANN_HPP
#define RAPO_BOLTZMANN_HPP

#include "rapo/common.hpp"
#include "rapo/kl_dual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace rapo
{

enum class MixtureSource
{
    Prior,
    Reweighted,
    BudgetExceedsMax,
    DegenerateConstant
};

inline const char* to_string(MixtureSource s)
{
    switch (s) {
    case MixtureSource::Prior: return "Prior";
    case MixtureSource::Reweighted: return "Reweighted";
    case MixtureSource::BudgetExceedsMax: return "BudgetExceedsMax";
    case MixtureSource::DegenerateConstant: return "DegenerateConstant";
    }
    return "Unknown";
}

template <class Scalar = double>
struct MixtureWeights
{
    Vector<Scalar> weights;
    Scalar kl_to_prior = 0;
    Scalar beta = 0;
    MixtureSource source = MixtureSource::Prior;
};

/// w_k proportional to rho_k e^{-beta h_k}. beta = 0 returns the prior untouched.
template <class Scalar>
Vector<Scalar> boltzmann_weights(const Vector<Scalar>& prior, const Vector<Scalar>& scores, Scalar beta)
{
    if (prior.size() == 0) {
        throw DomainError("boltzmann_weights: empty ensemble");
    }
    if (prior.size() != scores.size()) {
        throw DomainError("boltzmann_weights: prior and scores differ in length");
    }
    if (!(beta >= 0)) {
        throw DomainError("boltzmann_weights: beta must be nonnegative");
    }
    return tilted_weights(ValueSamples<Scalar>(scores, prior), beta);
}

template <class Scalar>
Scalar weights_entropy(const Vector<Scalar>& w)
{
    using std::log;
    Scalar h = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w(i) > 0) {
            h -= w(i) * log(w(i));
        }
    }
    return h;
}

/// Bisection on beta -> KL(w_beta || rho) so the mixture sits on the kappa ball.
template <class Scalar>
MixtureWeights<Scalar> solve_beta(const Vector<Scalar>& prior, const Vector<Scalar>& scores, Scalar kappa,
                                  Scalar tol = Scalar(1e-10), Scalar beta_max = Scalar(1e3), int max_iter = 200)
{
    if (!(kappa >= 0) || !std::isfinite(static_cast<double>(kappa))) {
        throw ConfigError("solve_beta: kappa must be finite and nonnegative");
    }
    if (!(tol > 0) || !(beta_max > 0)) {
        throw ConfigError("solve_beta: tol and beta_max must be positive");
    }
    const ValueSamples<Scalar> s(scores, prior);
    s.validate();

    MixtureWeights<Scalar> out;
    if (kappa == 0) {
        out.weights = prior;
        return out;
    }
    if (is_constant(s)) {
        out.weights = prior;
        out.source = MixtureSource::DegenerateConstant;
        return out;
    }

    DualConfig<Scalar> cfg;
    cfg.epsilon = kappa;
    cfg.eta_max = beta_max;
    cfg.eta_min = std::min(Scalar(1e-8), beta_max / 2);
    cfg.tol_kl = tol;
    cfg.max_iter = max_iter;
    const DualSolution<Scalar> sol = solve_eta(s, cfg);

    out.weights = sol.tilted;
    out.beta = sol.eta_star;
    out.kl_to_prior = kl_to_base(out.weights, prior);
    out.source = sol.status == DualStatus::BudgetExceedsMax ? MixtureSource::BudgetExceedsMax
                                                             : MixtureSource::Reweighted;
    return out;
}

/// Euclidean projection onto the probability simplex (sorted threshold).
template <class Derived>
Vector<typename Derived::Scalar> simplex_project(const Eigen::MatrixBase<Derived>& w)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = w.size();
    if (n == 0) {
        throw DomainError("simplex_project: empty vector");
    }
    if (!w.allFinite()) {
        throw DomainError("simplex_project: non-finite entry");
    }
    const Vector<Scalar> v = w;
    std::vector<Scalar> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<Scalar>());
    Scalar cumsum = 0;
    Scalar theta = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumsum += u[static_cast<std::size_t>(j)];
        const Scalar t = (cumsum - Scalar(1)) / Scalar(j + 1);
        if (u[static_cast<std::size_t>(j)] - t > 0) {
            theta = t;
        }
    }
    return (v.array() - theta).max(Scalar(0)).matrix();
}

/// (joint, model_term, traj_term) of KL((w, tau) || (rho, tau_hat)) by the chain rule.
template <class Scalar = double>
struct JointKl
{
    Scalar joint = 0;
    Scalar model_term = 0;
    Scalar traj_term = 0;
};

template <class Scalar>
JointKl<Scalar> joint_kl_decomposition(const Vector<Scalar>& w, const Vector<Scalar>& prior,
                                       const Vector<Scalar>& per_model_traj_kls)
{
    if (w.size() != prior.size() || w.size() != per_model_traj_kls.size()) {
        throw DomainError("joint_kl_decomposition: length mismatch");
    }
    JointKl<Scalar> out;
    out.model_term = kl_to_base(w, prior);
    out.traj_term = w.dot(per_model_traj_kls);
    out.joint = out.model_term + out.traj_term;
    return out;
}

/// Discounted per-step budget summed over an infinite horizon.
inline double per_step_to_trajectory_budget(double step_budget, double gamma)
{
    if (!(step_budget >= 0)) {
        throw DomainError("per_step_to_trajectory_budget: step budget must be nonnegative");
    }
    if (!(gamma >= 0 && gamma < 1)) {
        throw DomainError("per_step_to_trajectory_budget: gamma must lie in [0, 1)");
    }
    return step_budget / (1.0 - gamma);
}

} // namespace rapo

#endif
