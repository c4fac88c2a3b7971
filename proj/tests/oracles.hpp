// Reference implementations for tests. Nothing here calls the library's solvers.
#ifndef RAPO_TESTS_ORACLES_HPP
#define RAPO_TESTS_ORACLES_HPP

#include "rapo/mdp.hpp"
#include "rapo/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double kl(const VectorXd& q, const VectorXd& p)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        if (q(i) <= 0.0) {
            continue;
        }
        if (p(i) <= 0.0) {
            return std::numeric_limits<double>::infinity();
        }
        s += q(i) * std::log(q(i) / p(i));
    }
    return s;
}

inline double mean(const VectorXd& v, const VectorXd& p)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        s += p(i) * v(i);
    }
    return s;
}

/// Minimize f over the simplex in R^m (m <= 4) by nested grids: a full grid with step 1/20, then
/// repeated local grids around the incumbent, each 4x finer. `f` returns +inf for infeasible points.
/// `start` is always evaluated so a feasible incumbent exists.
inline double grid_min(const std::function<double(const VectorXd&)>& f, int m, const VectorXd& start)
{
    double best = f(start);
    VectorXd arg = start;
    const int half = 10;
    double step = 1.0 / (2 * half);
    auto visit = [&](const VectorXd& center, double h, int radius, bool full) {
        const int free = m - 1;
        std::vector<int> idx(static_cast<std::size_t>(free), -radius);
        if (full) {
            std::fill(idx.begin(), idx.end(), 0);
        }
        const int lo = full ? 0 : -radius;
        const int hi = full ? 2 * half : radius;
        VectorXd best_here = arg;
        double best_val = best;
        while (true) {
            VectorXd q(m);
            double rest = 1.0;
            bool ok = true;
            for (int i = 0; i < free; ++i) {
                q(i) = full ? idx[static_cast<std::size_t>(i)] * h : center(i) + idx[static_cast<std::size_t>(i)] * h;
                if (q(i) < 0.0) {
                    ok = false;
                }
                rest -= q(i);
            }
            q(free) = rest;
            if (rest < -1e-15) {
                ok = false;
            }
            if (ok) {
                q(free) = std::max(rest, 0.0);
                const double val = f(q);
                if (val < best_val) {
                    best_val = val;
                    best_here = q;
                }
            }
            int k = 0;
            while (k < free) {
                if (++idx[static_cast<std::size_t>(k)] <= hi) {
                    break;
                }
                idx[static_cast<std::size_t>(k)] = lo;
                ++k;
            }
            if (k == free) {
                break;
            }
        }
        best = best_val;
        arg = best_here;
    };
    if (m == 1) {
        return f(VectorXd::Ones(1));
    }
    visit(arg, step, half, true);
    for (int level = 0; level < 13; ++level) {
        visit(arg, step / 4.0, 10, false);
        step /= 4.0;
    }
    return best;
}

/// Largest t in [0, t_simplex] with KL(p + t d || p) <= eps, by bisection; KL is convex along the ray.
inline double boundary_step(const VectorXd& p, const VectorXd& d, double eps)
{
    double t_hi = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d(i) < 0.0) {
            t_hi = std::min(t_hi, p(i) / -d(i));
        }
    }
    auto at = [&](double t) { return (p + t * d).cwiseMax(0.0).eval(); };
    if (kl(at(t_hi), p) <= eps) {
        return t_hi;
    }
    double lo = 0.0;
    double hi = t_hi;
    for (int it = 0; it < 64; ++it) {
        const double mid = 0.5 * (lo + hi);
        (kl(at(mid), p) <= eps ? lo : hi) = mid;
    }
    return lo;
}

/// min_q q.V subject to KL(q || p) <= eps for m <= 4 and p > 0. The minimizer of a linear objective
/// lies on the boundary of the ball, so search over directions d in the tangent space of the simplex
/// (an angle for m = 3, two for m = 4) with the radial step from boundary_step.
inline double primal_min(const VectorXd& v, const VectorXd& p, double eps)
{
    const auto m = v.size();
    if (m == 1) {
        return v(0);
    }
    if (eps <= 0.0) {
        return mean(v, p);
    }
    // orthonormal basis of {x : sum x = 0}
    MatrixXd basis(m, m - 1);
    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        VectorXd e = VectorXd::Zero(m);
        e(j) = 1.0;
        e(m - 1) = -1.0;
        for (Eigen::Index k = 0; k < j; ++k) {
            e -= basis.col(k).dot(e) * basis.col(k);
        }
        basis.col(j) = e.normalized();
    }
    auto value = [&](const VectorXd& u) {
        const VectorXd d = basis * u;
        const double t = boundary_step(p, d, eps);
        return mean(v, (p + t * d).cwiseMax(0.0).eval());
    };
    // faces: on support S, KL(q || p) = KL(q || p_S / P(S)) - log P(S)
    double face_best = std::numeric_limits<double>::infinity();
    for (Eigen::Index drop = 0; drop < m; ++drop) {
        VectorXd vs(m - 1);
        VectorXd ps(m - 1);
        for (Eigen::Index i = 0, k = 0; i < m; ++i) {
            if (i != drop) {
                vs(k) = v(i);
                ps(k) = p(i);
                ++k;
            }
        }
        const double mass = ps.sum();
        const double budget = eps + std::log(mass);
        if (budget >= 0.0) {
            face_best = std::min(face_best, primal_min(vs, ps / mass, budget));
        }
    }
    if (m == 2) {
        return std::min({face_best, value(VectorXd::Constant(1, 1.0)), value(VectorXd::Constant(1, -1.0))});
    }
    const double pi = std::acos(-1.0);
    auto dir = [&](double a, double b) {
        VectorXd u(m - 1);
        if (m == 3) {
            u << std::cos(a), std::sin(a);
        }
        else {
            u << std::sin(b) * std::cos(a), std::sin(b) * std::sin(a), std::cos(b);
        }
        return u;
    };
    const int na = 72;
    const int nb = m == 3 ? 1 : 36;
    std::vector<std::array<double, 3>> coarse;
    for (int i = 0; i < na; ++i) {
        for (int j = 0; j < nb; ++j) {
            const double a = 2.0 * pi * i / na;
            const double b = m == 3 ? pi / 2.0 : pi * (j + 0.5) / nb;
            coarse.push_back({value(dir(a, b)), a, b});
        }
    }
    const std::size_t starts = std::min<std::size_t>(8, coarse.size());
    std::partial_sort(coarse.begin(), coarse.begin() + static_cast<std::ptrdiff_t>(starts), coarse.end());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t st = 0; st < starts; ++st) {
        double cur = coarse[st][0];
        double ba = coarse[st][1];
        double bb = coarse[st][2];
        double ha = 2.0 * pi / na;
        double hb = pi / nb;
        for (int level = 0; level < 30; ++level) {
            const double ca = ba;
            const double cb = bb;
            for (int i = -4; i <= 4; ++i) {
                for (int j = (m == 3 ? 0 : -4); j <= (m == 3 ? 0 : 4); ++j) {
                    const double a = ca + i * ha;
                    const double b = cb + j * hb;
                    const double f = value(dir(a, b));
                    if (f < cur) {
                        cur = f;
                        ba = a;
                        bb = b;
                    }
                }
            }
            ha /= 2.0;
            hb /= 2.0;
        }
        best = std::min(best, cur);
    }
    return std::min(best, face_best);
}

/// min_q q.V + KL(q || p) / eta, by grid search.
inline double penalty_min(const VectorXd& v, const VectorXd& p, double eta)
{
    return grid_min([&](const VectorXd& q) { return mean(v, q) + kl(q, p) / eta; }, static_cast<int>(v.size()), p);
}

/// -(1/eta) log sum p e^{-eta v} - eps/eta, computed in long double without max-shift.
inline long double dual_ld(const VectorXd& v, const VectorXd& p, long double eta, long double eps)
{
    long double z = 0.0L;
    const long double vmin = v.minCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        z += p(i) * std::exp(-eta * (v(i) - vmin));
    }
    return vmin - std::log(z) / eta - eps / eta;
}

/// sup over eta > 0 of the dual by golden-section search on log eta in [-25, 12], which is unimodal
/// because the dual is concave in 1/eta. Adds the hard-min value when the argmin mass is reachable.
inline double golden_dual(const VectorXd& v, const VectorXd& p, double eps)
{
    if (eps <= 0.0) {
        return mean(v, p);
    }
    const double vmin = v.minCoeff();
    double mass = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v(i) == vmin) {
            mass += p(i);
        }
    }
    if (eps >= -std::log(mass)) {
        return vmin;
    }
    const long double g = (std::sqrt(5.0L) - 1.0L) / 2.0L;
    long double a = -25.0L;
    long double b = 12.0L;
    long double c = b - g * (b - a);
    long double d = a + g * (b - a);
    auto f = [&](long double x) { return dual_ld(v, p, std::exp(x), eps); };
    long double fc = f(c);
    long double fd = f(d);
    for (int it = 0; it < 120; ++it) {
        if (fc < fd) {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        else {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        }
    }
    return static_cast<double>(std::max(fc, fd));
}

/// KL(q_eta || p) for the tilt q_eta ~ p e^{-eta V}, in long double: log(q/p) = -eta (V - vmin) - log Z.
inline long double tilt_kl_ld(const VectorXd& v, const VectorXd& p, long double eta)
{
    const long double vmin = v.minCoeff();
    long double z = 0.0L;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        z += p(i) * std::exp(-eta * (v(i) - vmin));
    }
    const long double log_z = std::log(z);
    long double s = 0.0L;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const long double lr = -eta * (v(i) - vmin) - log_z;
        s += p(i) * std::exp(lr) * lr;
    }
    return s;
}

/// Support-restricted inner infimum.
inline double row_inf(const VectorXd& row, const VectorXd& v, double eps)
{
    std::vector<double> vs;
    std::vector<double> ps;
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        if (row(i) > 0.0) {
            vs.push_back(v(i));
            ps.push_back(row(i));
        }
    }
    const VectorXd vv = Eigen::Map<VectorXd>(vs.data(), static_cast<Eigen::Index>(vs.size()));
    const VectorXd pp = Eigen::Map<VectorXd>(ps.data(), static_cast<Eigen::Index>(ps.size()));
    if (vv.size() == 1) {
        return vv(0);
    }
    return golden_dual(vv, pp, eps);
}

/// Robust value of a deterministic policy by fixed-point iteration from zero.
inline VectorXd robust_eval(const rapo::TabularMdp& mdp, const std::vector<int>& actions, double eps,
                            double tol = 1e-11)
{
    VectorXd v = VectorXd::Zero(mdp.n_states);
    for (int it = 0; it < 100000; ++it) {
        VectorXd next(mdp.n_states);
        for (int s = 0; s < mdp.n_states; ++s) {
            const int a = actions[static_cast<std::size_t>(s)];
            const VectorXd row = mdp.kernel.row(mdp.row(s, a)).transpose();
            next(s) = mdp.rewards(s, a) + mdp.gamma * row_inf(row, v, eps);
        }
        const double diff = (next - v).cwiseAbs().maxCoeff();
        v = next;
        if (diff < tol) {
            break;
        }
    }
    return v;
}

/// Nominal evaluation by iterating the Bellman backup to convergence.
inline VectorXd policy_value(const MatrixXd& kernel, const MatrixXd& rewards, const MatrixXd& policy, double gamma)
{
    const auto S = rewards.rows();
    const auto A = rewards.cols();
    VectorXd v = VectorXd::Zero(S);
    for (int it = 0; it < 1000000; ++it) {
        VectorXd next = VectorXd::Zero(S);
        for (Eigen::Index s = 0; s < S; ++s) {
            for (Eigen::Index a = 0; a < A; ++a) {
                next(s) += policy(s, a) * (rewards(s, a) + gamma * kernel.row(s * A + a).dot(v));
            }
        }
        const double diff = (next - v).cwiseAbs().maxCoeff();
        v = next;
        if (diff < 1e-14) {
            break;
        }
    }
    return v;
}

/// All A^S deterministic action assignments.
inline std::vector<std::vector<int>> all_deterministic(int n_states, int n_actions)
{
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(n_states), 0);
    while (true) {
        out.push_back(cur);
        int k = 0;
        while (k < n_states) {
            if (++cur[static_cast<std::size_t>(k)] < n_actions) {
                break;
            }
            cur[static_cast<std::size_t>(k)] = 0;
            ++k;
        }
        if (k == n_states) {
            return out;
        }
    }
}

inline VectorXd random_simplex(rapo::Rng& rng, int m)
{
    VectorXd p(m);
    for (int i = 0; i < m; ++i) {
        p(i) = -std::log(1.0 - rng.uniform()) + 1e-3;
    }
    return p / p.sum();
}

inline VectorXd random_values(rapo::Rng& rng, int m, double lo = -1.0, double hi = 1.0)
{
    VectorXd v(m);
    for (int i = 0; i < m; ++i) {
        v(i) = rng.uniform(lo, hi);
    }
    return v;
}

/// Random MDP with rewards in [0, 1]; with probability `sparse` a row keeps only a random subset of
/// successors (possibly one).
inline rapo::TabularMdp random_mdp(rapo::Rng& rng, int S, int A, double gamma, double sparse = 0.3)
{
    rapo::TabularMdp mdp;
    mdp.n_states = S;
    mdp.n_actions = A;
    mdp.gamma = gamma;
    mdp.kernel = MatrixXd::Zero(S * A, S);
    mdp.rewards = MatrixXd::Zero(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            VectorXd row = random_simplex(rng, S);
            if (rng.uniform() < sparse) {
                const int keep = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(S)));
                for (int i = keep; i < S; ++i) {
                    row(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(S)))) = 0.0;
                }
                if (row.sum() == 0.0) {
                    row(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(S)))) = 1.0;
                }
                row /= row.sum();
            }
            mdp.kernel.row(mdp.row(s, a)) = row.transpose();
            mdp.rewards(s, a) = rng.uniform();
        }
    }
    mdp.initial_dist = random_simplex(rng, S);
    return mdp;
}

inline MatrixXd random_policy(rapo::Rng& rng, int S, int A)
{
    MatrixXd p(S, A);
    for (int s = 0; s < S; ++s) {
        p.row(s) = random_simplex(rng, A).transpose();
    }
    return p;
}

/// Least-squares slope of log y on log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace oracle

#endif
