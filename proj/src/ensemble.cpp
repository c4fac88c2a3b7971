#include "rapo/ensemble.hpp"

#include "rapo/boltzmann.hpp"
#include "rapo/kl_dual.hpp"

#include <cmath>
#include <string>

namespace rapo
{

Perturbation perturbation_from_string(const std::string& name)
{
    if (name == "slip") {
        return Perturbation::SlipScale;
    }
    if (name == "stay") {
        return Perturbation::StayScale;
    }
    throw ConfigError("unknown perturbation family '" + name + "' (expected slip or stay)");
}

const char* to_string(Perturbation p)
{
    return p == Perturbation::SlipScale ? "slip" : "stay";
}

void EnsembleSpec::validate() const
{
    if (models.empty()) {
        throw DomainError("ensemble: needs at least one model");
    }
    if (scales.size() != size() || prior.size() != size()) {
        throw DomainError("ensemble: scales and prior must have one entry per model");
    }
    for (int k = 0; k < size(); ++k) {
        validate_kernel(models[static_cast<std::size_t>(k)], n_states, n_actions,
                        "ensemble model " + std::to_string(k));
    }
    require_simplex(prior, 1e-12, "ensemble prior");
}

Kernel perturb_kernel(const Kernel& kernel, int n_states, int n_actions, double scale, Perturbation family)
{
    if (!std::isfinite(scale) || scale < 0.0) {
        throw DomainError("perturb_kernel: scale must be finite and nonnegative");
    }
    if (scale == 1.0) {
        return kernel;
    }
    Kernel out = kernel;
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            const Eigen::Index r = static_cast<Eigen::Index>(s) * n_actions + a;
            auto row = out.row(r);
            Eigen::Index keep = 0;
            if (family == Perturbation::SlipScale) {
                row.maxCoeff(&keep);
            }
            else {
                keep = s;
            }
            const double other = 1.0 - kernel(r, keep);
            if (other <= 0.0) {
                continue;
            }
            if (family == Perturbation::SlipScale) {
                double moved = 0.0;
                for (Eigen::Index j = 0; j < row.size(); ++j) {
                    if (j != keep) {
                        row(j) = kernel(r, j) * scale;
                        moved += row(j);
                    }
                }
                row(keep) = 1.0 - moved;
            }
            else {
                const double stay = kernel(r, keep) * scale;
                const double rest = 1.0 - stay;
                for (Eigen::Index j = 0; j < row.size(); ++j) {
                    if (j != keep) {
                        row(j) = kernel(r, j) / other * rest;
                    }
                }
                row(keep) = stay;
            }
            if ((row.array() < 0.0).any()) {
                throw DomainError("perturb_kernel: scale " + std::to_string(scale) + " gives negative mass in row [s=" +
                                  std::to_string(s) + "][a=" + std::to_string(a) + "]");
            }
        }
    }
    return out;
}

EnsembleSpec build_ensemble(const TabularMdp& nominal, const VectorXd& param_grid, Perturbation family,
                            const VectorXd& prior)
{
    nominal.validate();
    if (param_grid.size() == 0) {
        throw DomainError("build_ensemble: empty parameter grid");
    }
    EnsembleSpec ens;
    ens.n_states = nominal.n_states;
    ens.n_actions = nominal.n_actions;
    ens.scales = param_grid;
    ens.prior = prior.size() == 0 ? VectorXd::Constant(param_grid.size(), 1.0 / static_cast<double>(param_grid.size()))
                                  : prior;
    for (Eigen::Index k = 0; k < param_grid.size(); ++k) {
        ens.models.push_back(perturb_kernel(nominal.kernel, nominal.n_states, nominal.n_actions, param_grid(k), family));
    }
    ens.validate();
    return ens;
}

Kernel mixture_kernel(const EnsembleSpec& ensemble, const VectorXd& w)
{
    if (w.size() != ensemble.size()) {
        throw DomainError("mixture_kernel: weight length differs from ensemble size");
    }
    require_simplex(w, 1e-10, "mixture weights");
    Kernel out = Kernel::Zero(ensemble.models.front().rows(), ensemble.models.front().cols());
    for (int k = 0; k < ensemble.size(); ++k) {
        if (w(k) != 0.0) {
            out += w(k) * ensemble.models[static_cast<std::size_t>(k)];
        }
    }
    return out;
}

std::vector<int> sample_next_states(const EnsembleSpec& ensemble, const VectorXd& w, int s, int a, int m, Rng& rng)
{
    if (m < 0) {
        throw DomainError("sample_next_states: m must be nonnegative");
    }
    if (w.size() != ensemble.size()) {
        throw DomainError("sample_next_states: weight length differs from ensemble size");
    }
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(m));
    const Eigen::Index r = static_cast<Eigen::Index>(s) * ensemble.n_actions + a;
    for (int i = 0; i < m; ++i) {
        const auto k = static_cast<std::size_t>(rng.categorical(w));
        out.push_back(static_cast<int>(rng.categorical(ensemble.models[k].row(r))));
    }
    return out;
}

VulnerabilityScores score_models(const ValueFn& critic, const EnsembleSpec& ensemble,
                                 const std::vector<std::pair<int, int>>& batch, int scorer_samples, Rng& rng,
                                 double ema_decay, const VulnerabilityScores* previous)
{
    if (batch.empty()) {
        throw DomainError("score_models: empty batch");
    }
    if (critic.size() != ensemble.n_states) {
        throw DomainError("score_models: critic length differs from state count");
    }
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) {
        throw ConfigError("score_models: ema_decay must lie in [0, 1)");
    }
    const int K = ensemble.size();
    VectorXd raw = VectorXd::Zero(K);
    for (int k = 0; k < K; ++k) {
        const Kernel& model = ensemble.models[static_cast<std::size_t>(k)];
        double acc = 0.0;
        for (const auto& [s, a] : batch) {
            const Eigen::Index r = static_cast<Eigen::Index>(s) * ensemble.n_actions + a;
            if (scorer_samples <= 0) {
                acc += model.row(r).dot(critic);
            }
            else {
                double inner = 0.0;
                for (int j = 0; j < scorer_samples; ++j) {
                    inner += critic(rng.categorical(model.row(r)));
                }
                acc += inner / scorer_samples;
            }
        }
        raw(k) = acc / static_cast<double>(batch.size());
    }
    VulnerabilityScores out;
    out.ema_decay = ema_decay;
    if (previous != nullptr && ema_decay > 0.0 && previous->scores.size() == K) {
        out.scores = ema_decay * previous->scores + (1.0 - ema_decay) * raw;
        out.raw_history_len = previous->raw_history_len + 1;
    }
    else {
        out.scores = raw;
        out.raw_history_len = 1;
    }
    return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw DomainError("loglog_slope: need at least two paired points");
    }
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw DomainError("loglog_slope: values must be positive");
        }
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

namespace
{

/// Phi(beta) = -(1/beta) log mean e^{-beta h} - kappa / beta on a uniform sample.
double reference_dual(const VectorXd& h, double hmin, double beta, double kappa)
{
    double acc = 0.0;
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        acc += std::expm1(-beta * (h(i) - hmin));
    }
    return hmin - std::log1p(acc / static_cast<double>(h.size())) / beta - kappa / beta;
}

} // namespace

FiniteKTable finite_k_convergence(const std::function<double(Rng&)>& score_sampler, const std::vector<int>& k_grid,
                                  double kappa, int trials, Rng& rng, int k_ref)
{
    if (k_grid.empty() || trials <= 0 || k_ref <= 0) {
        throw ConfigError("finite_k_convergence: need a nonempty k_grid, trials > 0, k_ref > 0");
    }
    for (std::size_t i = 1; i < k_grid.size(); ++i) {
        if (k_grid[i] <= k_grid[i - 1]) {
            throw ConfigError("finite_k_convergence: k_grid must be increasing");
        }
    }
    if (!(kappa > 0.0)) {
        throw ConfigError("finite_k_convergence: kappa must be positive");
    }

    Rng ref_rng = rng.split(0);
    VectorXd h_ref(k_ref);
    for (int i = 0; i < k_ref; ++i) {
        h_ref(i) = score_sampler(ref_rng);
    }
    FiniteKTable table;
    const double hmin = h_ref.minCoeff();
    if (h_ref.maxCoeff() - hmin < 1e-12 * (1.0 + std::abs(hmin))) {
        table.degenerate = true;
        for (int k : k_grid) {
            table.rows.push_back({k, 0.0, 0.0});
        }
        return table;
    }
    const VectorXd prior_ref = VectorXd::Constant(k_ref, 1.0 / k_ref);
    const MixtureWeights<double> ref = solve_beta(prior_ref, h_ref, kappa, 1e-12);
    table.beta_ref = ref.beta;
    table.value_ref = reference_dual(h_ref, hmin, ref.beta, kappa);

    std::vector<double> ks;
    std::vector<double> devs;
    std::vector<double> gaps;
    for (std::size_t gi = 0; gi < k_grid.size(); ++gi) {
        const int K = k_grid[gi];
        Rng trial_rng = rng.split(1 + gi);
        const VectorXd prior = VectorXd::Constant(K, 1.0 / K);
        double dev = 0.0;
        double gap = 0.0;
        for (int t = 0; t < trials; ++t) {
            VectorXd h(K);
            for (int i = 0; i < K; ++i) {
                h(i) = score_sampler(trial_rng);
            }
            const MixtureWeights<double> w = solve_beta(prior, h, kappa, 1e-12);
            dev += std::abs(w.beta - table.beta_ref);
            if (w.beta > 0.0) {
                gap += table.value_ref - reference_dual(h_ref, hmin, w.beta, kappa);
            }
        }
        FiniteKRow row{K, dev / trials, gap / trials};
        table.rows.push_back(row);
        ks.push_back(K);
        devs.push_back(row.beta_deviation);
        gaps.push_back(row.value_gap);
    }
    if (ks.size() >= 2) {
        table.beta_slope = loglog_slope(ks, devs);
        table.gap_slope = loglog_slope(ks, gaps);
    }
    return table;
}

} // namespace rapo
