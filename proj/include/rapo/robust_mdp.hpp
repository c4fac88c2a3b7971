#ifndef RAPO_ROBUST_MDP_HPP
#define RAPO_ROBUST_MDP_HPP

#include "rapo/kl_dual.hpp"
#include "rapo/mdp.hpp"

#include <utility>

namespace rapo
{

/// Inner infimum for one kernel row, restricted to the row's support.
struct RobustRow
{
    double value = 0;
    VectorXd q;
    double eta = 0;
    double kl = 0;
    DualStatus status = DualStatus::Tight;
    /// Single-atom or constant-value support: the ball adds nothing.
    bool degenerate = false;
};

RobustRow robust_row(const VectorXd& p_row, const ValueFn& v, double epsilon, const DualConfig<double>& cfg);

/// Q(s,a) = r(s,a) + gamma inf_{p in ball} E_p[V].
MatrixXd robust_q(const ValueFn& v, const TabularMdp& mdp, double epsilon, const DualConfig<double>& cfg);

ValueFn robust_evaluation_backup(const ValueFn& v, const TabularMdp& mdp, const PolicyTable& policy, double epsilon,
                                 const DualConfig<double>& cfg);

/// Greedy is deterministic, ties to the lowest action index.
std::pair<ValueFn, PolicyTable> robust_optimality_backup(const ValueFn& v, const TabularMdp& mdp, double epsilon,
                                                         const DualConfig<double>& cfg);

/// Backup with a fixed temperature per (s,a) instead of the solved one:
/// inner value is Psi_eta(V) - epsilon / eta. epsilon = 0 is the soft-penalty backup.
ValueFn fixed_eta_evaluation_backup(const ValueFn& v, const TabularMdp& mdp, const PolicyTable& policy,
                                    const MatrixXd& eta_map, double epsilon);

struct RobustViResult
{
    ValueFn v;
    PolicyTable policy;
    int iterations = 0;
    double residual = 0;
};

RobustViResult robust_value_iteration(const TabularMdp& mdp, double epsilon, const DualConfig<double>& cfg,
                                      double tol_v = 1e-8, int max_iter = 100000);

/// Exact value of a fixed policy under a fixed kernel: (I - gamma P_pi) V = r_pi.
ValueFn nominal_policy_evaluation(const Kernel& kernel, const MatrixXd& rewards, const PolicyTable& policy,
                                  double gamma);

/// Fixed point of the robust evaluation operator. Solved by policy iteration
/// on the adversary: tilt every row against the current value, evaluate the
/// tilted kernel exactly, repeat until the value moves by at most tol_v. Once that stalls at the
/// dual-solve noise floor, finishes with plain evaluation backups.
ValueFn robust_policy_evaluation(const TabularMdp& mdp, const PolicyTable& policy, double epsilon,
                                 const DualConfig<double>& cfg, double tol_v = 1e-10, int max_iter = 1000);

struct WorstCaseKernel
{
    Kernel kernel;
    MatrixXd eta_map;
    MatrixXd kl_map;
};

WorstCaseKernel extract_worst_case_kernel(const TabularMdp& mdp, const PolicyTable& policy, const ValueFn& v_robust,
                                          double epsilon, const DualConfig<double>& cfg);

/// d(s) = (1 - gamma) sum_t gamma^t Pr(s_t = s).
VectorXd occupancy_measure(const Kernel& kernel, const PolicyTable& policy, double gamma,
                           const VectorXd& initial_dist);

struct RpdlReport
{
    double lhs = 0;
    /// Advantage of pi under its own worst-case kernel, occupancy of pi' under its own.
    double rhs = 0;
    double residual = 0;
    /// Same occupancy, advantage of V^pi taken through the worst-case kernel of pi'.
    double rhs_shared_kernel = 0;
    double residual_shared_kernel = 0;
};

RpdlReport rpdl_report(const TabularMdp& mdp, const PolicyTable& pi, const PolicyTable& pi_prime, double epsilon,
                       const DualConfig<double>& cfg);

/// |J(pi', p_wc(pi')) - J(pi, p_wc(pi)) - E_{d^{pi'}, pi'}[A^pi] / (1 - gamma)|.
double rpdl_residual(const TabularMdp& mdp, const PolicyTable& pi, const PolicyTable& pi_prime, double epsilon,
                     const DualConfig<double>& cfg);

struct ValueDrop
{
    ValueFn gap;
    double bound = 0;
};

/// gap = V_nominal - V_robust, bound = gamma / (1 - gamma) * osc(V_nominal) * sqrt(2 epsilon).
ValueDrop value_drop_check(const TabularMdp& mdp, const PolicyTable& policy, double epsilon,
                           const DualConfig<double>& cfg);

/// Plain value iteration on the nominal kernel, same tie-breaking as the robust one.
RobustViResult value_iteration(const TabularMdp& mdp, double tol_v = 1e-10, int max_iter = 100000);

} // namespace rapo

#endif
