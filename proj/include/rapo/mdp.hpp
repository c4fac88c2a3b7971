#ifndef RAPO_MDP_HPP
#define RAPO_MDP_HPP

#include "rapo/common.hpp"

#include <string>
#include <vector>

namespace rapo
{

/// Transition tensor stored as an (S*A) x S matrix; row s*A + a is p(.|s,a).
using Kernel = MatrixXd;
/// S x A table of action probabilities.
using PolicyTable = MatrixXd;
/// Value over states.
using ValueFn = VectorXd;

struct TabularMdp
{
    int n_states = 0;
    int n_actions = 0;
    Kernel kernel;
    MatrixXd rewards;
    double gamma = 0.9;
    VectorXd initial_dist;

    Eigen::Index row(int s, int a) const { return static_cast<Eigen::Index>(s) * n_actions + a; }

    /// Throws DomainError naming the offending row or field.
    void validate() const;

    /// States whose every action self-loops with probability 1 and reward 0.
    std::vector<bool> absorbing() const;
};

/// Row-stochastic check for a kernel shaped like `mdp`.
void validate_kernel(const Kernel& kernel, int n_states, int n_actions, const std::string& what);

void validate_policy(const PolicyTable& policy, int n_states, int n_actions);

/// One-hot policy from a vector of actions.
PolicyTable deterministic_policy(const std::vector<int>& actions, int n_actions);

PolicyTable uniform_policy(int n_states, int n_actions);

/// P_pi(s, s') = sum_a pi(a|s) p(s'|s,a).
MatrixXd state_transition(const Kernel& kernel, const PolicyTable& policy);

/// r_pi(s) = sum_a pi(a|s) r(s,a).
VectorXd policy_reward(const MatrixXd& rewards, const PolicyTable& policy);

/// Expected discounted return from the initial distribution.
double expected_return(const TabularMdp& mdp, const ValueFn& v);

/// Sup-norm oscillation max V - min V.
double oscillation(const VectorXd& v);

} // namespace rapo

#endif
