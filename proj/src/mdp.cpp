#include "rapo/mdp.hpp"

#include <cmath>

namespace rapo
{

void validate_kernel(const Kernel& kernel, int n_states, int n_actions, const std::string& what)
{
    const Eigen::Index rows = static_cast<Eigen::Index>(n_states) * n_actions;
    if (kernel.rows() != rows || kernel.cols() != n_states) {
        throw DomainError(what + ": kernel must be (n_states*n_actions) x n_states");
    }
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            const auto r = kernel.row(static_cast<Eigen::Index>(s) * n_actions + a);
            const std::string where = what + " kernel row [s=" + std::to_string(s) + "][a=" + std::to_string(a) + "]";
            require_simplex(r.transpose(), 1e-12, where);
        }
    }
}

void validate_policy(const PolicyTable& policy, int n_states, int n_actions)
{
    if (policy.rows() != n_states || policy.cols() != n_actions) {
        throw DomainError("policy: shape must be n_states x n_actions");
    }
    for (int s = 0; s < n_states; ++s) {
        require_simplex(policy.row(s).transpose(), 1e-12, "policy row [s=" + std::to_string(s) + "]");
    }
}

void TabularMdp::validate() const
{
    if (n_states <= 0 || n_actions <= 0) {
        throw DomainError("mdp: n_states and n_actions must be positive");
    }
    validate_kernel(kernel, n_states, n_actions, "mdp");
    if (rewards.rows() != n_states || rewards.cols() != n_actions) {
        throw DomainError("mdp: rewards must be n_states x n_actions");
    }
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            const double r = rewards(s, a);
            if (!std::isfinite(r) || r < 0.0 || r > 1.0) {
                throw DomainError("mdp: reward [s=" + std::to_string(s) + "][a=" + std::to_string(a) +
                                  "] outside [0, 1]");
            }
        }
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw DomainError("mdp: gamma must lie strictly inside (0, 1)");
    }
    if (initial_dist.size() != n_states) {
        throw DomainError("mdp: initial_dist must have n_states entries");
    }
    require_simplex(initial_dist, 1e-12, "mdp initial_dist");
}

std::vector<bool> TabularMdp::absorbing() const
{
    std::vector<bool> out(static_cast<std::size_t>(n_states), false);
    for (int s = 0; s < n_states; ++s) {
        bool absorb = true;
        for (int a = 0; a < n_actions && absorb; ++a) {
            absorb = kernel(row(s, a), s) == 1.0 && rewards(s, a) == 0.0;
        }
        out[static_cast<std::size_t>(s)] = absorb;
    }
    return out;
}

PolicyTable deterministic_policy(const std::vector<int>& actions, int n_actions)
{
    PolicyTable pi = PolicyTable::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= n_actions) {
            throw DomainError("deterministic_policy: action out of range");
        }
        pi(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
    }
    return pi;
}

PolicyTable uniform_policy(int n_states, int n_actions)
{
    return PolicyTable::Constant(n_states, n_actions, 1.0 / n_actions);
}

MatrixXd state_transition(const Kernel& kernel, const PolicyTable& policy)
{
    const Eigen::Index S = policy.rows();
    const Eigen::Index A = policy.cols();
    MatrixXd P = MatrixXd::Zero(S, S);
    for (Eigen::Index s = 0; s < S; ++s) {
        for (Eigen::Index a = 0; a < A; ++a) {
            const double pa = policy(s, a);
            if (pa != 0.0) {
                P.row(s) += pa * kernel.row(s * A + a);
            }
        }
    }
    return P;
}

VectorXd policy_reward(const MatrixXd& rewards, const PolicyTable& policy)
{
    return rewards.cwiseProduct(policy).rowwise().sum();
}

double expected_return(const TabularMdp& mdp, const ValueFn& v)
{
    return mdp.initial_dist.dot(v);
}

double oscillation(const VectorXd& v)
{
    return v.size() == 0 ? 0.0 : v.maxCoeff() - v.minCoeff();
}

} // namespace rapo
