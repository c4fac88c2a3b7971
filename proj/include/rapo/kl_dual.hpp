#ifndef RAPO_KL_DUAL_HPP
#define RAPO_KL_DUAL_HPP

#include "rapo/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rapo
{

/// Next-state values V(s'_i) with base probabilities p̂_i over the sample support.
template <class Scalar = double>
struct ValueSamples
{
    Vector<Scalar> values;
    Vector<Scalar> base_probs;

    ValueSamples() = default;

    /// Uniform base 1/m.
    explicit ValueSamples(Vector<Scalar> v)
        : values(std::move(v)), base_probs(Vector<Scalar>::Constant(values.size(), Scalar(1) / Scalar(values.size())))
    {
    }

    ValueSamples(Vector<Scalar> v, Vector<Scalar> p) : values(std::move(v)), base_probs(std::move(p)) {}

    Eigen::Index size() const { return values.size(); }

    void validate() const
    {
        if (values.size() == 0) {
            throw DomainError("value samples: need at least one sample");
        }
        if (values.size() != base_probs.size()) {
            throw DomainError("value samples: values and base_probs differ in length");
        }
        if (!values.allFinite()) {
            throw DomainError("value samples: non-finite value");
        }
        // Summation error grows with m; allow a few ulps per atom beyond 1e-12.
        const double tol = std::max(1e-12, 4.0 * static_cast<double>(values.size()) * 2.220446049250313e-16);
        require_simplex(base_probs, tol, "value samples base_probs");
    }

    bool has_uniform_base(double tol = 1e-12) const
    {
        const Scalar u = Scalar(1) / Scalar(values.size());
        return ((base_probs.array() - u).abs() <= Scalar(tol)).all();
    }
};

enum class DualStatus
{
    Tight,
    DegenerateConstant,
    BudgetExceedsMax,
    ClampedMax
};

inline const char* to_string(DualStatus s)
{
    switch (s) {
    case DualStatus::Tight: return "Tight";
    case DualStatus::DegenerateConstant: return "DegenerateConstant";
    case DualStatus::BudgetExceedsMax: return "BudgetExceedsMax";
    case DualStatus::ClampedMax: return "ClampedMax";
    }
    return "Unknown";
}

template <class Scalar = double>
struct DualConfig
{
    Scalar epsilon = 0;
    Scalar eta_min = Scalar(1e-8);
    Scalar eta_max = Scalar(1e3);
    Scalar tol_kl = Scalar(1e-10);
    int max_iter = 200;
    /// Safeguarded Newton steps on the KL map after bisection has bracketed the root.
    bool newton_refine = false;
    /// Subtract c_m / eta from the dual value (conservative finite-sample correction).
    bool bias_correction = false;
    Scalar bias_c_m = 0;

    void validate() const
    {
        if (!(epsilon >= 0) || !std::isfinite(static_cast<double>(epsilon))) {
            throw ConfigError("dual config: epsilon must be finite and nonnegative");
        }
        if (!(eta_min > 0) || !(eta_min < eta_max) || !std::isfinite(static_cast<double>(eta_max))) {
            throw ConfigError("dual config: need 0 < eta_min < eta_max < inf");
        }
        if (!(tol_kl > 0)) {
            throw ConfigError("dual config: tol_kl must be positive");
        }
        if (max_iter <= 0) {
            throw ConfigError("dual config: max_iter must be positive");
        }
        if (bias_correction && !(bias_c_m >= 0)) {
            throw ConfigError("dual config: bias_c_m must be nonnegative");
        }
    }
};

template <class Scalar = double>
struct DualSolution
{
    Scalar eta_star = 0;
    Vector<Scalar> tilted;
    Scalar kl_achieved = 0;
    Scalar dual_value = 0;
    DualStatus status = DualStatus::Tight;
    int iterations = 0;
};

namespace detail
{

template <class Scalar>
Scalar support_min(const ValueSamples<Scalar>& s)
{
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s.base_probs(i) > 0 && s.values(i) < lo) {
            lo = s.values(i);
        }
    }
    return lo;
}

template <class Scalar>
Scalar support_max(const ValueSamples<Scalar>& s)
{
    Scalar hi = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s.base_probs(i) > 0 && s.values(i) > hi) {
            hi = s.values(i);
        }
    }
    return hi;
}

template <class Scalar>
Scalar weighted_mean(const ValueSamples<Scalar>& s)
{
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s.base_probs(i) > 0) {
            acc += s.base_probs(i) * s.values(i);
        }
    }
    return acc / s.base_probs.sum();
}

/// S = sum_i p_i expm1(-eta (V_i - Vmin)), so Z e^{eta Vmin} = 1 + S.
template <class Scalar>
Scalar shifted_partition_m1(const ValueSamples<Scalar>& s, Scalar eta, Scalar vmin)
{
    using std::expm1;
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s.base_probs(i) > 0) {
            acc += s.base_probs(i) * expm1(-eta * (s.values(i) - vmin));
        }
    }
    return acc;
}

} // namespace detail

template <class Scalar>
bool is_constant(const ValueSamples<Scalar>& s)
{
    const Scalar osc = detail::support_max(s) - detail::support_min(s);
    const Scalar mean = detail::weighted_mean(s);
    using std::abs;
    return osc < Scalar(1e-12) * (Scalar(1) + abs(mean));
}

/// Psi_eta(V) = -(1/eta) log E_p[e^{-eta V}]; the weighted mean below eta = 1e-9.
template <class Scalar>
Scalar entropic_risk(const ValueSamples<Scalar>& s, Scalar eta)
{
    s.validate();
    if (!(eta >= 0)) {
        throw DomainError("entropic_risk: eta must be nonnegative");
    }
    if (eta < Scalar(1e-9)) {
        return detail::weighted_mean(s);
    }
    using std::log1p;
    const Scalar vmin = detail::support_min(s);
    return vmin - log1p(detail::shifted_partition_m1(s, eta, vmin)) / eta;
}

/// Same functional read as inf_p { E_p[V] + KL(p||p̂)/eta }.
template <class Scalar>
Scalar soft_penalty_risk(const ValueSamples<Scalar>& s, Scalar eta)
{
    if (!(eta > 0)) {
        throw DomainError("soft_penalty_risk: eta must be positive");
    }
    return entropic_risk(s, eta);
}

/// phi(eta) = Psi_eta(V) - epsilon / eta.
template <class Scalar>
Scalar dual_objective(const ValueSamples<Scalar>& s, Scalar eta, Scalar epsilon)
{
    if (!(epsilon >= 0)) {
        throw DomainError("dual_objective: epsilon must be nonnegative");
    }
    if (eta == 0 && epsilon > 0) {
        throw DomainError("dual_objective: eta = 0 with epsilon > 0 is -inf");
    }
    if (!(eta >= 0)) {
        throw DomainError("dual_objective: eta must be positive");
    }
    const Scalar risk = entropic_risk(s, eta);
    return epsilon == 0 ? risk : risk - epsilon / eta;
}

/// q_i proportional to p_i e^{-eta V_i}.
template <class Scalar>
Vector<Scalar> tilted_weights(const ValueSamples<Scalar>& s, Scalar eta)
{
    s.validate();
    if (!(eta >= 0)) {
        throw DomainError("tilted_weights: eta must be nonnegative");
    }
    if (eta == 0 || detail::support_max(s) == detail::support_min(s)) {
        return s.base_probs;
    }
    using std::exp;
    const Scalar vmin = detail::support_min(s);
    Vector<Scalar> q(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        q(i) = s.base_probs(i) > 0 ? s.base_probs(i) * exp(-eta * (s.values(i) - vmin)) : Scalar(0);
    }
    return q / q.sum();
}

/// KL(q || p) with 0 ln 0 = 0; +inf when q puts mass where p has none.
template <class DerivedQ, class DerivedP>
typename DerivedQ::Scalar kl_to_base(const Eigen::MatrixBase<DerivedQ>& q, const Eigen::MatrixBase<DerivedP>& p)
{
    using Scalar = typename DerivedQ::Scalar;
    if (q.size() != p.size()) {
        throw DomainError("kl_to_base: length mismatch");
    }
    using std::log;
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        if (q(i) <= 0) {
            continue;
        }
        if (p(i) <= 0) {
            return std::numeric_limits<Scalar>::infinity();
        }
        acc += q(i) * log(q(i) / p(i));
    }
    return acc < 0 ? Scalar(0) : acc;
}

namespace detail
{

/// KL(q_eta || p) using the shifted log-partition, no explicit ratios.
template <class Scalar>
Scalar tilt_kl(const ValueSamples<Scalar>& s, Scalar eta)
{
    if (eta == 0) {
        return 0;
    }
    using std::exp;
    using std::log1p;
    const Scalar vmin = detail::support_min(s);
    const Scalar log_z = log1p(shifted_partition_m1(s, eta, vmin));
    Scalar z = 0;
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s.base_probs(i) > 0) {
            const Scalar d = s.values(i) - vmin;
            const Scalar w = s.base_probs(i) * exp(-eta * d);
            z += w;
            acc += w * d;
        }
    }
    const Scalar kl = -eta * acc / z - log_z;
    return kl < 0 ? Scalar(0) : kl;
}

} // namespace detail

/// KL of the tilt against a uniform base; the per-row budget check used in training.
template <class Scalar>
Scalar empirical_kl(const ValueSamples<Scalar>& s, Scalar eta)
{
    s.validate();
    if (!s.has_uniform_base()) {
        throw DomainError("empirical_kl: base is not uniform, use kl_to_base");
    }
    if (!(eta >= 0)) {
        throw DomainError("empirical_kl: eta must be nonnegative");
    }
    return detail::tilt_kl(s, eta);
}

/// d/deta KL(q_eta || p) = eta Var_{q_eta}(V).
template <class Scalar>
Scalar kl_derivative(const ValueSamples<Scalar>& s, Scalar eta)
{
    if (eta == 0) {
        return 0;
    }
    const Vector<Scalar> q = tilted_weights(s, eta);
    const Scalar mean = q.dot(s.values);
    const Scalar var = (q.array() * (s.values.array() - mean).square()).sum();
    return eta * var;
}

/// E_q[V] under the tilt; the primal value of the tilted distribution.
template <class Scalar>
Scalar tilted_mean(const ValueSamples<Scalar>& s, Scalar eta)
{
    return tilted_weights(s, eta).dot(s.values);
}

/// sqrt(log(1/xi) / m), the finite-sample constant of the conservative correction.
inline double bias_correction_constant(Eigen::Index m, double xi)
{
    if (m <= 0 || !(xi > 0 && xi < 1)) {
        throw ConfigError("bias_correction_constant: need m > 0 and xi in (0, 1)");
    }
    return std::sqrt(std::log(1.0 / xi) / static_cast<double>(m));
}

template <class Scalar = double>
struct EtaSearch
{
    Scalar eta = 0;
    Scalar kl = 0;
    int iterations = 0;
    bool tight = false;
};

/// Bisection in log(eta) on the monotone map eta -> KL(q_eta || p).
/// Assumes KL(lo) <= epsilon <= KL(hi). When the tolerance is not met within
/// max_iter, returns the feasible end lo.
template <class Scalar>
EtaSearch<Scalar> bisect_eta(const ValueSamples<Scalar>& s, Scalar epsilon, Scalar lo, Scalar hi, Scalar tol,
                             int max_iter, bool newton_refine = false)
{
    using std::abs;
    using std::exp;
    using std::log;

    EtaSearch<Scalar> out;
    Scalar kl_lo = detail::tilt_kl(s, lo);
    if (abs(kl_lo - epsilon) <= tol) {
        out.eta = lo;
        out.kl = kl_lo;
        out.tight = true;
        return out;
    }
    Scalar llo = log(lo);
    Scalar lhi = log(hi);
    for (int it = 0; it < max_iter; ++it) {
        const Scalar mid = exp(Scalar(0.5) * (llo + lhi));
        const Scalar kl = detail::tilt_kl(s, mid);
        ++out.iterations;
        if (abs(kl - epsilon) <= tol) {
            out.eta = mid;
            out.kl = kl;
            out.tight = true;
            return out;
        }
        if (kl < epsilon) {
            llo = log(mid);
            kl_lo = kl;
        }
        else {
            lhi = log(mid);
        }
        if (newton_refine) {
            // Newton on KL(eta) = epsilon from the feasible end, kept inside the bracket.
            const Scalar e0 = exp(llo);
            const Scalar slope = kl_derivative(s, e0);
            const Scalar var_floor = Scalar(1e-10);
            if (slope > var_floor * e0) {
                const Scalar cand = e0 + (epsilon - kl_lo) / slope;
                if (cand > e0 && log(cand) < lhi) {
                    const Scalar kc = detail::tilt_kl(s, cand);
                    ++out.iterations;
                    if (abs(kc - epsilon) <= tol) {
                        out.eta = cand;
                        out.kl = kc;
                        out.tight = true;
                        return out;
                    }
                    if (kc < epsilon) {
                        llo = log(cand);
                        kl_lo = kc;
                    }
                    else {
                        lhi = log(cand);
                    }
                }
            }
        }
        if (lhi - llo <= Scalar(4) * std::numeric_limits<Scalar>::epsilon()) {
            break;
        }
    }
    out.eta = exp(llo);
    out.kl = kl_lo;
    out.tight = abs(kl_lo - epsilon) <= tol;
    return out;
}

/// Optimal dual temperature for inf { E_p[V] : KL(p || p̂) <= epsilon }.
template <class Scalar>
DualSolution<Scalar> solve_eta(const ValueSamples<Scalar>& s, const DualConfig<Scalar>& cfg)
{
    s.validate();
    cfg.validate();

    DualSolution<Scalar> sol;
    const Scalar eps = cfg.epsilon;

    if (eps == 0) {
        sol.eta_star = cfg.eta_min;
        sol.tilted = s.base_probs;
        sol.kl_achieved = 0;
        sol.dual_value = detail::weighted_mean(s);
        sol.status = DualStatus::Tight;
        return sol;
    }
    if (is_constant(s)) {
        sol.eta_star = cfg.eta_max;
        sol.tilted = s.base_probs;
        sol.kl_achieved = 0;
        sol.dual_value = detail::weighted_mean(s) - eps / cfg.eta_max;
        sol.status = DualStatus::DegenerateConstant;
        return sol;
    }

    const Scalar kl_max = detail::tilt_kl(s, cfg.eta_max);
    const Scalar kl_min = detail::tilt_kl(s, cfg.eta_min);
    using std::abs;
    if (eps > kl_max + cfg.tol_kl) {
        sol.eta_star = cfg.eta_max;
        sol.status = DualStatus::BudgetExceedsMax;
    }
    else if (kl_min > eps + cfg.tol_kl) {
        // Root lies below the bracket.
        sol.eta_star = cfg.eta_min;
        sol.status = DualStatus::ClampedMax;
    }
    else if (abs(kl_max - eps) <= cfg.tol_kl) {
        sol.eta_star = cfg.eta_max;
        sol.status = DualStatus::Tight;
    }
    else {
        const EtaSearch<Scalar> r =
            bisect_eta(s, eps, cfg.eta_min, cfg.eta_max, cfg.tol_kl, cfg.max_iter, cfg.newton_refine);
        if (!r.tight) {
            throw ConvergenceError("solve_eta: bisection did not reach tol_kl", static_cast<double>(r.kl - eps));
        }
        sol.eta_star = r.eta;
        sol.iterations = r.iterations;
        sol.status = DualStatus::Tight;
    }

    sol.tilted = tilted_weights(s, sol.eta_star);
    sol.kl_achieved = detail::tilt_kl(s, sol.eta_star);
    sol.dual_value = dual_objective(s, sol.eta_star, eps);
    if (cfg.bias_correction) {
        sol.dual_value -= cfg.bias_c_m / sol.eta_star;
    }
    return sol;
}

/// Mass of the base on the atoms attaining the support minimum.
template <class Scalar>
Scalar argmin_mass(const ValueSamples<Scalar>& s)
{
    const Scalar vmin = detail::support_min(s);
    using std::abs;
    const Scalar tol = Scalar(1e-12) * (Scalar(1) + abs(vmin));
    Scalar mass = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s.base_probs(i) > 0 && s.values(i) - vmin <= tol) {
            mass += s.base_probs(i);
        }
    }
    return mass;
}

template <class Scalar = double>
struct WorstCase
{
    Scalar value = 0;
    Vector<Scalar> q;
    Scalar eta = 0;
    Scalar kl = 0;
    DualStatus status = DualStatus::Tight;
};

/// Minimizer and value of inf_{KL(p||p̂) <= eps} E_p[V].
/// Tight solves report the dual value and the tilt at eta*. Where the bracket
/// truncates the dual the exact primal answer is used instead: constant values
/// give the constant with q = p̂; a budget covering -log p̂(argmin) gives the
/// support minimum with q = p̂ conditioned on the argmin set; a budget beyond
/// KL(eta_max) but short of that gives the feasible eta_max tilt and its mean.
template <class Scalar>
WorstCase<Scalar> worst_case(const ValueSamples<Scalar>& s, const DualConfig<Scalar>& cfg)
{
    const DualSolution<Scalar> sol = solve_eta(s, cfg);
    WorstCase<Scalar> out;
    out.eta = sol.eta_star;
    out.status = sol.status;
    switch (sol.status) {
    case DualStatus::DegenerateConstant:
        out.value = detail::weighted_mean(s);
        out.q = s.base_probs;
        out.kl = 0;
        return out;
    case DualStatus::BudgetExceedsMax: {
        using std::abs;
        using std::log;
        const Scalar mass = argmin_mass(s);
        if (cfg.epsilon >= -log(mass)) {
            const Scalar vmin = detail::support_min(s);
            const Scalar tol = Scalar(1e-12) * (Scalar(1) + abs(vmin));
            out.q = Vector<Scalar>::Zero(s.size());
            for (Eigen::Index i = 0; i < s.size(); ++i) {
                if (s.base_probs(i) > 0 && s.values(i) - vmin <= tol) {
                    out.q(i) = s.base_probs(i) / mass;
                }
            }
            out.value = vmin;
            out.kl = -log(mass);
            return out;
        }
        out.q = sol.tilted;
        out.value = sol.tilted.dot(s.values);
        out.kl = sol.kl_achieved;
        return out;
    }
    default:
        out.q = sol.tilted;
        out.value = sol.dual_value;
        out.kl = sol.kl_achieved;
        return out;
    }
}

/// inf_{KL(p||p̂) <= eps} E_p[V]; see worst_case for the truncated-bracket cases.
template <class Scalar>
Scalar robust_expectation(const ValueSamples<Scalar>& s, const DualConfig<Scalar>& cfg)
{
    return worst_case(s, cfg).value;
}

} // namespace rapo

#endif
