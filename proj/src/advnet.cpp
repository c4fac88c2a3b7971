#include "rapo/advnet.hpp"

#include "rapo/ensemble.hpp"

#include <algorithm>
#include <cmath>

namespace rapo
{

AdvNetParams AdvNetParams::zeros(int input_dim)
{
    if (input_dim <= 0) {
        throw DomainError("advnet: input dimension must be positive");
    }
    AdvNetParams p;
    p.w1 = MatrixXd::Zero(kAdvNetHidden, input_dim);
    p.b1 = VectorXd::Zero(kAdvNetHidden);
    p.w2 = MatrixXd::Zero(kAdvNetHidden, kAdvNetHidden);
    p.b2 = VectorXd::Zero(kAdvNetHidden);
    p.w3 = MatrixXd::Zero(1, kAdvNetHidden);
    p.b3 = VectorXd::Zero(1);
    return p;
}

AdvNetParams AdvNetParams::glorot(int input_dim, Rng& rng)
{
    AdvNetParams p = zeros(input_dim);
    auto fill = [&rng](MatrixXd& w) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            for (Eigen::Index i = 0; i < w.rows(); ++i) {
                w(i, j) = rng.uniform(-limit, limit);
            }
        }
    };
    fill(p.w1);
    fill(p.w2);
    fill(p.w3);
    return p;
}

Eigen::Index AdvNetParams::size() const
{
    return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
}

VectorXd AdvNetParams::flatten() const
{
    VectorXd flat(size());
    Eigen::Index o = 0;
    auto put = [&](const auto& m) {
        flat.segment(o, m.size()) = Eigen::Map<const VectorXd>(m.data(), m.size());
        o += m.size();
    };
    put(w1);
    put(b1);
    put(w2);
    put(b2);
    put(w3);
    put(b3);
    return flat;
}

void AdvNetParams::unflatten(const VectorXd& flat)
{
    if (flat.size() != size()) {
        throw DomainError("advnet: flat parameter vector has the wrong length");
    }
    Eigen::Index o = 0;
    auto take = [&](auto& m) {
        Eigen::Map<VectorXd>(m.data(), m.size()) = flat.segment(o, m.size());
        o += m.size();
    };
    take(w1);
    take(b1);
    take(w2);
    take(b2);
    take(w3);
    take(b3);
}

namespace
{

double softplus(double x)
{
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x)
{
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

VectorXd advnet_forward(const AdvNetParams& params, const MatrixXd& features, AdvNetCache& cache)
{
    if (features.cols() != params.input_dim()) {
        throw DomainError("advnet_forward: feature width " + std::to_string(features.cols()) +
                          " differs from input dimension " + std::to_string(params.input_dim()));
    }
    cache.x = features;
    cache.h1 = ((features * params.w1.transpose()).rowwise() + params.b1.transpose()).array().tanh().matrix();
    cache.h2 = ((cache.h1 * params.w2.transpose()).rowwise() + params.b2.transpose()).array().tanh().matrix();
    cache.pre = (cache.h2 * params.w3.transpose()).col(0).array() + params.b3(0);
    const Eigen::Index B = features.rows();
    cache.eta.resize(B);
    cache.pass.resize(B);
    for (Eigen::Index i = 0; i < B; ++i) {
        const double sp = softplus(cache.pre(i));
        if (sp < kAdvNetEtaMin) {
            cache.eta(i) = kAdvNetEtaMin;
            cache.pass(i) = 0.0;
        }
        else if (sp > kAdvNetEtaMax) {
            cache.eta(i) = kAdvNetEtaMax;
            cache.pass(i) = 0.0;
        }
        else {
            cache.eta(i) = sp;
            cache.pass(i) = 1.0;
        }
    }
    return cache.eta;
}

VectorXd advnet_forward(const AdvNetParams& params, const MatrixXd& features)
{
    AdvNetCache cache;
    return advnet_forward(params, features, cache);
}

AdvNetParams advnet_backward(const AdvNetParams& params, const AdvNetCache& cache, const VectorXd& dloss_deta)
{
    const Eigen::Index B = cache.x.rows();
    if (dloss_deta.size() != B) {
        throw DomainError("advnet_backward: gradient length differs from batch size");
    }
    VectorXd g_pre(B);
    for (Eigen::Index i = 0; i < B; ++i) {
        g_pre(i) = dloss_deta(i) * cache.pass(i) * sigmoid(cache.pre(i));
    }
    AdvNetParams g = params.zeros_like();
    g.w3 = g_pre.transpose() * cache.h2;
    g.b3(0) = g_pre.sum();
    const MatrixXd g_z2 = ((g_pre * params.w3).array() * (1.0 - cache.h2.array().square())).matrix();
    g.w2 = g_z2.transpose() * cache.h1;
    g.b2 = g_z2.colwise().sum().transpose();
    const MatrixXd g_z1 = ((g_z2 * params.w2).array() * (1.0 - cache.h1.array().square())).matrix();
    g.w1 = g_z1.transpose() * cache.x;
    g.b1 = g_z1.colwise().sum().transpose();
    return g;
}

MatrixXd encode_state_action(const std::vector<int>& states, const std::vector<int>& actions, int n_states,
                             int n_actions, bool include_action)
{
    if (include_action && states.size() != actions.size()) {
        throw DomainError("encode_state_action: states and actions differ in length");
    }
    const auto B = static_cast<Eigen::Index>(states.size());
    MatrixXd x = MatrixXd::Zero(B, include_action ? n_states + n_actions : n_states);
    for (Eigen::Index i = 0; i < B; ++i) {
        const int s = states[static_cast<std::size_t>(i)];
        if (s < 0 || s >= n_states) {
            throw DomainError("encode_state_action: state out of range");
        }
        x(i, s) = 1.0;
        if (include_action) {
            const int a = actions[static_cast<std::size_t>(i)];
            if (a < 0 || a >= n_actions) {
                throw DomainError("encode_state_action: action out of range");
            }
            x(i, n_states + a) = 1.0;
        }
    }
    return x;
}

const char* to_string(ProjectionStatus s)
{
    switch (s) {
    case ProjectionStatus::Tight: return "Tight";
    case ProjectionStatus::Degenerate: return "Degenerate";
    case ProjectionStatus::BudgetExceedsMax: return "BudgetExceedsMax";
    case ProjectionStatus::NotConverged: return "NotConverged";
    case ProjectionStatus::ZeroBudget: return "ZeroBudget";
    }
    return "Unknown";
}

Projection project_eta_to_budget(const VectorXd& row, double eta_init, double epsilon, const ProjectionConfig& cfg)
{
    if (!(epsilon >= 0.0)) {
        throw DomainError("project_eta_to_budget: epsilon must be nonnegative");
    }
    if (!(cfg.eta_min > 0.0 && cfg.eta_min < cfg.eta_max) || !(cfg.tol > 0.0) || cfg.max_iter <= 0) {
        throw ConfigError("project_eta_to_budget: invalid bracket, tolerance or iteration cap");
    }
    const ValueSamples<double> s(row);
    s.validate();
    Projection out;
    if (epsilon == 0.0) {
        out.status = ProjectionStatus::ZeroBudget;
        return out;
    }
    if (is_constant(s)) {
        out.eta = cfg.eta_max;
        out.status = ProjectionStatus::Degenerate;
        return out;
    }
    const double kl_max = detail::tilt_kl(s, cfg.eta_max);
    if (epsilon > kl_max + cfg.tol) {
        out.eta = cfg.eta_max;
        out.kl = kl_max;
        out.status = ProjectionStatus::BudgetExceedsMax;
        return out;
    }

    double lo = cfg.eta_min;
    double hi = cfg.eta_max;
    if (cfg.warm_start && std::isfinite(eta_init) && eta_init > 0.0) {
        const double e0 = std::clamp(eta_init, cfg.eta_min, cfg.eta_max);
        const double k0 = detail::tilt_kl(s, e0);
        out.iterations = 1;
        if (std::abs(k0 - epsilon) <= cfg.tol) {
            out.eta = e0;
            out.kl = k0;
            return out;
        }
        if (k0 < epsilon) {
            lo = e0;
            hi = std::min(2.0 * e0, cfg.eta_max);
            while (hi < cfg.eta_max && detail::tilt_kl(s, hi) < epsilon) {
                ++out.iterations;
                lo = hi;
                hi = std::min(2.0 * hi, cfg.eta_max);
            }
        }
        else {
            hi = e0;
            lo = std::max(0.5 * e0, cfg.eta_min);
            while (lo > cfg.eta_min && detail::tilt_kl(s, lo) > epsilon) {
                ++out.iterations;
                hi = lo;
                lo = std::max(0.5 * lo, cfg.eta_min);
            }
        }
    }
    const int budget = std::max(cfg.max_iter - out.iterations, 1);
    const EtaSearch<double> r = bisect_eta(s, epsilon, lo, hi, cfg.tol, budget);
    out.eta = r.eta;
    out.kl = r.kl;
    out.iterations += r.iterations;
    out.status = r.tight ? ProjectionStatus::Tight : ProjectionStatus::NotConverged;
    return out;
}

StraightThrough straight_through(double eta_pred, double eta_star)
{
    (void)eta_pred;
    return {eta_star, 1.0};
}

double robust_dual_value(const VectorXd& row, double eta_tilde, double epsilon, bool offset)
{
    const ValueSamples<double> s(row);
    if (eta_tilde == 0.0) {
        if (offset && epsilon > 0.0) {
            throw DomainError("robust_dual_value: eta = 0 with epsilon > 0");
        }
        return entropic_risk(s, 0.0);
    }
    return offset ? dual_objective(s, eta_tilde, epsilon) : entropic_risk(s, eta_tilde);
}

double robust_dual_value_derivative(const VectorXd& row, double eta, double epsilon, bool offset)
{
    if (!(eta > 0.0)) {
        throw DomainError("robust_dual_value_derivative: eta must be positive");
    }
    const ValueSamples<double> s(row);
    const double kl = detail::tilt_kl(s, eta);
    return ((offset ? epsilon : 0.0) - kl) / (eta * eta);
}

VectorXd robust_targets(const VectorXd& rewards, const VectorXd& done_flags, double gamma, const VectorXd& v_rob)
{
    if (rewards.size() != done_flags.size() || rewards.size() != v_rob.size()) {
        throw DomainError("robust_targets: length mismatch");
    }
    return rewards.array() + gamma * (1.0 - done_flags.array()) * v_rob.array();
}

void TargetBatch::validate() const
{
    const Eigen::Index B = rewards.size();
    if (done_flags.size() != B || next_value_matrix.rows() != B || features.rows() != B) {
        throw DomainError("target batch: rewards, done_flags, next_value_matrix and features need equal rows");
    }
    if (B > 0 && next_value_matrix.cols() == 0) {
        throw DomainError("target batch: next_value_matrix needs at least one column");
    }
    for (Eigen::Index i = 0; i < B; ++i) {
        if (done_flags(i) != 0.0 && done_flags(i) != 1.0) {
            throw DomainError("target batch: done flags must be 0 or 1");
        }
    }
    if (!next_value_matrix.allFinite() || !rewards.allFinite()) {
        throw DomainError("target batch: non-finite entry");
    }
}

namespace
{

struct RowTerms
{
    double v_rob = 0.0;
    double kl = 0.0;
    double dv_deta = 0.0;
    double dkl_deta = 0.0;
};

RowTerms row_terms(const VectorXd& row, double eta_tilde, const AdvNetLossConfig& cfg, bool need_grad)
{
    RowTerms t;
    const ValueSamples<double> s(row);
    t.v_rob = robust_dual_value(row, eta_tilde, cfg.epsilon, cfg.offset);
    t.kl = detail::tilt_kl(s, eta_tilde);
    if (need_grad) {
        t.dv_deta = ((cfg.offset ? cfg.epsilon : 0.0) - t.kl) / (eta_tilde * eta_tilde);
        t.dkl_deta = kl_derivative(s, eta_tilde);
    }
    return t;
}

} // namespace

AdvNetLossGrads advnet_loss_and_grads(const AdvNetParams& params, const TargetBatch& batch,
                                      const AdvNetLossConfig& cfg)
{
    batch.validate();
    const Eigen::Index B = batch.size();
    if (B == 0) {
        throw DomainError("advnet_loss_and_grads: empty batch");
    }
    AdvNetCache cache;
    AdvNetLossGrads out;
    AdvNetEvaluation& ev = out.eval;
    ev.eta_pred = advnet_forward(params, batch.features, cache);
    ev.eta_star.resize(B);
    ev.eta_tilde.resize(B);
    ev.v_rob.resize(B);
    ev.kl = VectorXd::Zero(B);
    ev.degenerate.assign(static_cast<std::size_t>(B), false);

    VectorXd g_eta = VectorXd::Zero(B);
    const double inv_b = 1.0 / static_cast<double>(B);
    double kl_sum = 0.0;
    double sup_sum = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        const VectorXd row = batch.next_value_matrix.row(i).transpose();
        const Projection proj = project_eta_to_budget(row, ev.eta_pred(i), cfg.epsilon, cfg.projection);
        ev.diagnostics.projection_iterations += proj.iterations;
        const bool degenerate =
            proj.status == ProjectionStatus::Degenerate || proj.status == ProjectionStatus::ZeroBudget;
        ev.degenerate[static_cast<std::size_t>(i)] = degenerate;
        ev.eta_star(i) = proj.eta;
        ev.eta_tilde(i) = straight_through(ev.eta_pred(i), proj.eta).value;
        if (degenerate) {
            ++ev.diagnostics.degenerate_rows;
            ev.v_rob(i) = row.mean();
            continue;
        }
        const RowTerms t = row_terms(row, ev.eta_tilde(i), cfg, true);
        ev.v_rob(i) = t.v_rob;
        ev.kl(i) = t.kl;
        const double hinge = std::max(t.kl - cfg.epsilon, 0.0);
        const double err = ev.eta_pred(i) - ev.eta_star(i);
        kl_sum += hinge * hinge;
        sup_sum += err * err;
        const double carry = cfg.gamma * (1.0 - batch.done_flags(i));
        g_eta(i) = inv_b * (carry * t.dv_deta + cfg.lambda_kl * 2.0 * hinge * t.dkl_deta + cfg.lambda_sup * 2.0 * err);
    }
    ev.y = robust_targets(batch.rewards, batch.done_flags, cfg.gamma, ev.v_rob);
    ev.target_term = ev.y.mean();
    ev.kl_term = cfg.lambda_kl * kl_sum * inv_b;
    ev.sup_term = cfg.lambda_sup * sup_sum * inv_b;
    ev.loss = ev.target_term + ev.kl_term + ev.sup_term;

    // eta statistics over the non-degenerate rows only
    const Eigen::Index active = B - ev.diagnostics.degenerate_rows;
    double eta_sum = 0.0;
    double err_sum = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        if (!ev.degenerate[static_cast<std::size_t>(i)]) {
            eta_sum += ev.eta_tilde(i);
            err_sum += std::abs(ev.eta_pred(i) - ev.eta_star(i));
        }
    }
    ev.diagnostics.mean_eta = active > 0 ? eta_sum / static_cast<double>(active) : 0.0;
    ev.diagnostics.mean_abs_eta_error = active > 0 ? err_sum / static_cast<double>(active) : 0.0;
    ev.diagnostics.mean_kl = ev.kl.mean();
    ev.diagnostics.mean_v_rob = ev.v_rob.mean();
    ev.diagnostics.mean_eta_pred = ev.eta_pred.mean();

    out.grads = advnet_backward(params, cache, g_eta);
    return out;
}

double advnet_frozen_loss(const AdvNetParams& params, const TargetBatch& batch, const AdvNetLossConfig& cfg,
                          const VectorXd& eta_star, const VectorXd& eta_pred_anchor,
                          const std::vector<bool>& degenerate)
{
    batch.validate();
    const Eigen::Index B = batch.size();
    const VectorXd pred = advnet_forward(params, batch.features);
    double y_sum = 0.0;
    double kl_sum = 0.0;
    double sup_sum = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        const VectorXd row = batch.next_value_matrix.row(i).transpose();
        const double carry = cfg.gamma * (1.0 - batch.done_flags(i));
        if (degenerate[static_cast<std::size_t>(i)]) {
            y_sum += batch.rewards(i) + carry * row.mean();
            continue;
        }
        const double eta_tilde = eta_star(i) - eta_pred_anchor(i) + pred(i);
        const RowTerms t = row_terms(row, eta_tilde, cfg, false);
        const double hinge = std::max(t.kl - cfg.epsilon, 0.0);
        const double err = pred(i) - eta_star(i);
        y_sum += batch.rewards(i) + carry * t.v_rob;
        kl_sum += hinge * hinge;
        sup_sum += err * err;
    }
    const double inv_b = 1.0 / static_cast<double>(B);
    return y_sum * inv_b + cfg.lambda_kl * kl_sum * inv_b + cfg.lambda_sup * sup_sum * inv_b;
}

void Adam::step(VectorXd& theta, const VectorXd& grad, double lr)
{
    if (m.size() != theta.size()) {
        m = VectorXd::Zero(theta.size());
        v = VectorXd::Zero(theta.size());
        step_count = 0;
    }
    ++step_count;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + guard);
}

AdvNetUpdateResult advnet_update(const AdvNetParams& params, const TargetBatch& batch, const AdvNetLossConfig& cfg,
                                 int steps, double step_size, Adam& opt)
{
    if (steps < 0) {
        throw ConfigError("advnet_update: steps must be nonnegative");
    }
    AdvNetUpdateResult out{params, {}};
    VectorXd flat = params.flatten();
    for (int i = 0; i < steps; ++i) {
        const AdvNetLossGrads lg = advnet_loss_and_grads(out.params, batch, cfg);
        opt.step(flat, lg.grads.flatten(), step_size);
        out.params.unflatten(flat);
    }
    if (batch.size() > 0) {
        out.last = advnet_loss_and_grads(out.params, batch, cfg).eval;
    }
    return out;
}

AdvNetParams advnet_update(const AdvNetParams& params, const TargetBatch& batch, double epsilon, double lambda_kl,
                           int steps, double step_size)
{
    AdvNetLossConfig cfg;
    cfg.epsilon = epsilon;
    cfg.lambda_kl = lambda_kl;
    Adam opt;
    return advnet_update(params, batch, cfg, steps, step_size, opt).params;
}

QuadraticProbe quadratic_error_probe(const ValueSamples<double>& samples, double epsilon,
                                     const std::vector<double>& delta_grid)
{
    DualConfig<double> cfg;
    cfg.epsilon = epsilon;
    cfg.tol_kl = 1e-13;
    const DualSolution<double> sol = solve_eta(samples, cfg);
    if (sol.status != DualStatus::Tight) {
        throw DomainError(std::string("quadratic_error_probe: dual solve is not tight (") + to_string(sol.status) +
                          ")");
    }
    QuadraticProbe probe;
    probe.eta_star = sol.eta_star;
    const double phi_star = dual_objective(samples, sol.eta_star, epsilon);
    std::vector<double> xs;
    std::vector<double> ys;
    for (double d : delta_grid) {
        const double gap = phi_star - dual_objective(samples, sol.eta_star + d, epsilon);
        probe.delta.push_back(d);
        probe.gap.push_back(gap);
        if (d != 0.0 && gap > 0.0) {
            xs.push_back(std::abs(d));
            ys.push_back(gap);
        }
    }
    probe.slope = xs.size() >= 2 ? loglog_slope(xs, ys) : 0.0;
    return probe;
}

} // namespace rapo
