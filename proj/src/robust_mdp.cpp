#include "rapo/robust_mdp.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace rapo
{

namespace
{

struct Support
{
    std::vector<Eigen::Index> idx;
    ValueSamples<double> samples;
};

Support gather_support(const VectorXd& p_row, const ValueFn& v)
{
    Support sup;
    for (Eigen::Index j = 0; j < p_row.size(); ++j) {
        if (p_row(j) > 0.0) {
            sup.idx.push_back(j);
        }
    }
    const auto n = static_cast<Eigen::Index>(sup.idx.size());
    VectorXd vals(n);
    VectorXd probs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        vals(i) = v(sup.idx[static_cast<std::size_t>(i)]);
        probs(i) = p_row(sup.idx[static_cast<std::size_t>(i)]);
    }
    sup.samples = ValueSamples<double>(std::move(vals), std::move(probs));
    return sup;
}

void check_shapes(const ValueFn& v, const TabularMdp& mdp)
{
    if (v.size() != mdp.n_states) {
        throw DomainError("robust backup: value has " + std::to_string(v.size()) + " entries, mdp has " +
                          std::to_string(mdp.n_states) + " states");
    }
    if (!v.allFinite()) {
        throw DomainError("robust backup: non-finite value");
    }
}

} // namespace

RobustRow robust_row(const VectorXd& p_row, const ValueFn& v, double epsilon, const DualConfig<double>& cfg)
{
    const Support sup = gather_support(p_row, v);
    RobustRow out;
    out.q = p_row;
    if (sup.idx.empty()) {
        throw DomainError("robust_row: kernel row has no support");
    }
    if (sup.idx.size() == 1) {
        out.value = v(sup.idx.front());
        out.eta = cfg.eta_max;
        out.status = DualStatus::DegenerateConstant;
        out.degenerate = true;
        return out;
    }
    if (epsilon == 0.0) {
        out.value = p_row.dot(v);
        out.eta = 0.0;
        return out;
    }
    DualConfig<double> c = cfg;
    c.epsilon = epsilon;
    const WorstCase<double> wc = worst_case(sup.samples, c);
    out.value = wc.value;
    out.eta = wc.eta;
    out.kl = wc.kl;
    out.status = wc.status;
    out.degenerate = wc.status == DualStatus::DegenerateConstant;
    out.q.setZero();
    for (std::size_t i = 0; i < sup.idx.size(); ++i) {
        out.q(sup.idx[i]) = wc.q(static_cast<Eigen::Index>(i));
    }
    return out;
}

MatrixXd robust_q(const ValueFn& v, const TabularMdp& mdp, double epsilon, const DualConfig<double>& cfg)
{
    check_shapes(v, mdp);
    MatrixXd q(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            const VectorXd row = mdp.kernel.row(mdp.row(s, a)).transpose();
            q(s, a) = mdp.rewards(s, a) + mdp.gamma * robust_row(row, v, epsilon, cfg).value;
        }
    }
    return q;
}

ValueFn robust_evaluation_backup(const ValueFn& v, const TabularMdp& mdp, const PolicyTable& policy, double epsilon,
                                 const DualConfig<double>& cfg)
{
    validate_policy(policy, mdp.n_states, mdp.n_actions);
    return robust_q(v, mdp, epsilon, cfg).cwiseProduct(policy).rowwise().sum();
}

std::pair<ValueFn, PolicyTable> robust_optimality_backup(const ValueFn& v, const TabularMdp& mdp, double epsilon,
                                                         const DualConfig<double>& cfg)
{
    const MatrixXd q = robust_q(v, mdp, epsilon, cfg);
    ValueFn out(mdp.n_states);
    std::vector<int> greedy(static_cast<std::size_t>(mdp.n_states), 0);
    for (int s = 0; s < mdp.n_states; ++s) {
        int best = 0;
        for (int a = 1; a < mdp.n_actions; ++a) {
            if (q(s, a) > q(s, best)) {
                best = a;
            }
        }
        greedy[static_cast<std::size_t>(s)] = best;
        out(s) = q(s, best);
    }
    return {out, deterministic_policy(greedy, mdp.n_actions)};
}

ValueFn fixed_eta_evaluation_backup(const ValueFn& v, const TabularMdp& mdp, const PolicyTable& policy,
                                    const MatrixXd& eta_map, double epsilon)
{
    check_shapes(v, mdp);
    if (eta_map.rows() != mdp.n_states || eta_map.cols() != mdp.n_actions) {
        throw DomainError("fixed_eta_evaluation_backup: eta_map must be n_states x n_actions");
    }
    ValueFn out = ValueFn::Zero(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            const Support sup = gather_support(mdp.kernel.row(mdp.row(s, a)).transpose(), v);
            const double inner = dual_objective(sup.samples, eta_map(s, a), epsilon);
            out(s) += policy(s, a) * (mdp.rewards(s, a) + mdp.gamma * inner);
        }
    }
    return out;
}

RobustViResult robust_value_iteration(const TabularMdp& mdp, double epsilon, const DualConfig<double>& cfg,
                                      double tol_v, int max_iter)
{
    mdp.validate();
    RobustViResult res;
    res.v = ValueFn::Zero(mdp.n_states);
    for (int it = 1; it <= max_iter; ++it) {
        auto [next, greedy] = robust_optimality_backup(res.v, mdp, epsilon, cfg);
        res.residual = (next - res.v).lpNorm<Eigen::Infinity>();
        res.v = std::move(next);
        res.policy = std::move(greedy);
        res.iterations = it;
        if (res.residual <= tol_v) {
            return res;
        }
    }
    throw ConvergenceError("robust_value_iteration: max_iter exceeded", res.residual);
}

RobustViResult value_iteration(const TabularMdp& mdp, double tol_v, int max_iter)
{
    return robust_value_iteration(mdp, 0.0, DualConfig<double>{}, tol_v, max_iter);
}

ValueFn nominal_policy_evaluation(const Kernel& kernel, const MatrixXd& rewards, const PolicyTable& policy,
                                  double gamma)
{
    const Eigen::Index S = policy.rows();
    if (kernel.rows() != S * policy.cols() || kernel.cols() != S || rewards.rows() != S ||
        rewards.cols() != policy.cols()) {
        throw DomainError("nominal_policy_evaluation: shape mismatch");
    }
    const MatrixXd P = state_transition(kernel, policy);
    const MatrixXd lhs = MatrixXd::Identity(S, S) - gamma * P;
    return lhs.partialPivLu().solve(policy_reward(rewards, policy));
}

WorstCaseKernel extract_worst_case_kernel(const TabularMdp& mdp, const PolicyTable& policy, const ValueFn& v_robust,
                                          double epsilon, const DualConfig<double>& cfg)
{
    check_shapes(v_robust, mdp);
    validate_policy(policy, mdp.n_states, mdp.n_actions);
    WorstCaseKernel wc;
    wc.kernel = mdp.kernel;
    wc.eta_map = MatrixXd::Zero(mdp.n_states, mdp.n_actions);
    wc.kl_map = MatrixXd::Zero(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            const Eigen::Index r = mdp.row(s, a);
            const RobustRow rr = robust_row(mdp.kernel.row(r).transpose(), v_robust, epsilon, cfg);
            wc.kernel.row(r) = rr.q.transpose();
            wc.eta_map(s, a) = rr.eta;
            wc.kl_map(s, a) = rr.kl;
        }
    }
    return wc;
}

ValueFn robust_policy_evaluation(const TabularMdp& mdp, const PolicyTable& policy, double epsilon,
                                 const DualConfig<double>& cfg, double tol_v, int max_iter)
{
    mdp.validate();
    validate_policy(policy, mdp.n_states, mdp.n_actions);
    ValueFn v = nominal_policy_evaluation(mdp.kernel, mdp.rewards, policy, mdp.gamma);
    if (epsilon == 0.0) {
        return v;
    }
    double residual = 0.0;
    double previous = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < max_iter; ++it) {
        const WorstCaseKernel wc = extract_worst_case_kernel(mdp, policy, v, epsilon, cfg);
        ValueFn next = nominal_policy_evaluation(wc.kernel, mdp.rewards, policy, mdp.gamma);
        residual = (next - v).lpNorm<Eigen::Infinity>();
        v = std::move(next);
        if (residual <= tol_v) {
            return v;
        }
        // stalled at the dual-solve noise floor
        if (residual > 0.5 * previous) {
            break;
        }
        previous = residual;
    }
    // finish with the contracting evaluation backup
    for (; it < max_iter; ++it) {
        ValueFn next = robust_evaluation_backup(v, mdp, policy, epsilon, cfg);
        residual = (next - v).lpNorm<Eigen::Infinity>();
        v = std::move(next);
        if (residual <= tol_v) {
            return v;
        }
    }
    throw ConvergenceError("robust_policy_evaluation: max_iter exceeded", residual);
}

VectorXd occupancy_measure(const Kernel& kernel, const PolicyTable& policy, double gamma,
                           const VectorXd& initial_dist)
{
    const Eigen::Index S = policy.rows();
    if (initial_dist.size() != S) {
        throw DomainError("occupancy_measure: initial_dist length mismatch");
    }
    const MatrixXd P = state_transition(kernel, policy);
    const MatrixXd lhs = MatrixXd::Identity(S, S) - gamma * P.transpose();
    return (1.0 - gamma) * lhs.partialPivLu().solve(initial_dist);
}

RpdlReport rpdl_report(const TabularMdp& mdp, const PolicyTable& pi, const PolicyTable& pi_prime, double epsilon,
                       const DualConfig<double>& cfg)
{
    const ValueFn v_pi = robust_policy_evaluation(mdp, pi, epsilon, cfg);
    const ValueFn v_pp = robust_policy_evaluation(mdp, pi_prime, epsilon, cfg);
    const WorstCaseKernel wc_pi = extract_worst_case_kernel(mdp, pi, v_pi, epsilon, cfg);
    const WorstCaseKernel wc_pp = extract_worst_case_kernel(mdp, pi_prime, v_pp, epsilon, cfg);

    const VectorXd d = occupancy_measure(wc_pp.kernel, pi_prime, mdp.gamma, mdp.initial_dist);

    auto advantage_term = [&](const Kernel& kernel) {
        double acc = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            for (int a = 0; a < mdp.n_actions; ++a) {
                const double q = mdp.rewards(s, a) + mdp.gamma * kernel.row(mdp.row(s, a)).dot(v_pi);
                acc += d(s) * pi_prime(s, a) * (q - v_pi(s));
            }
        }
        return acc / (1.0 - mdp.gamma);
    };

    RpdlReport rep;
    rep.lhs = mdp.initial_dist.dot(v_pp) - mdp.initial_dist.dot(v_pi);
    rep.rhs = advantage_term(wc_pi.kernel);
    rep.residual = std::abs(rep.lhs - rep.rhs);
    rep.rhs_shared_kernel = advantage_term(wc_pp.kernel);
    rep.residual_shared_kernel = std::abs(rep.lhs - rep.rhs_shared_kernel);
    return rep;
}

double rpdl_residual(const TabularMdp& mdp, const PolicyTable& pi, const PolicyTable& pi_prime, double epsilon,
                     const DualConfig<double>& cfg)
{
    return rpdl_report(mdp, pi, pi_prime, epsilon, cfg).residual;
}

ValueDrop value_drop_check(const TabularMdp& mdp, const PolicyTable& policy, double epsilon,
                           const DualConfig<double>& cfg)
{
    const ValueFn v_nom = nominal_policy_evaluation(mdp.kernel, mdp.rewards, policy, mdp.gamma);
    const ValueFn v_rob = robust_policy_evaluation(mdp, policy, epsilon, cfg);
    ValueDrop out;
    out.gap = v_nom - v_rob;
    out.bound = mdp.gamma / (1.0 - mdp.gamma) * oscillation(v_nom) * std::sqrt(2.0 * epsilon);
    return out;
}

} // namespace rapo
