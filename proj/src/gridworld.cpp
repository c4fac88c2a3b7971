#include "rapo/gridworld.hpp"

#include <array>

namespace rapo
{

BridgeLayout bridge_layout(const BridgeParams& p)
{
    if (p.length < 3 || p.corridor_rows < 1) {
        throw ConfigError("bridge world: need length >= 3 and at least one corridor row");
    }
    if (!(p.slip >= 0.0 && p.slip <= 1.0)) {
        throw ConfigError("bridge world: slip must lie in [0, 1]");
    }
    BridgeLayout l;
    l.rows = p.corridor_rows + 2;
    l.cols = p.length;
    l.start = l.cell(l.rows - 1, 0);
    l.goal = l.cell(l.rows - 1, l.cols - 1);
    l.terminal = l.rows * l.cols;
    return l;
}

TabularMdp bridge_world(const BridgeParams& p)
{
    const BridgeLayout l = bridge_layout(p);
    const int S = l.terminal + 1;
    constexpr int A = 4;
    constexpr std::array<std::array<int, 2>, 4> moves{{{-1, 0}, {0, 1}, {1, 0}, {0, -1}}};
    const int wall_row = p.corridor_rows;
    const int bridge_row = l.rows - 1;
    auto is_wall = [&](int r, int c) { return r == wall_row && c >= 1 && c <= l.cols - 2; };

    TabularMdp mdp;
    mdp.n_states = S;
    mdp.n_actions = A;
    mdp.gamma = p.gamma;
    mdp.kernel = Kernel::Zero(static_cast<Eigen::Index>(S) * A, S);
    mdp.rewards = MatrixXd::Zero(S, A);
    mdp.initial_dist = VectorXd::Zero(S);
    mdp.initial_dist(l.start) = 1.0;

    for (int r = 0; r < l.rows; ++r) {
        for (int c = 0; c < l.cols; ++c) {
            const int s = l.cell(r, c);
            for (int a = 0; a < A; ++a) {
                const Eigen::Index row = mdp.row(s, a);
                if (is_wall(r, c)) {
                    mdp.kernel(row, s) = 1.0;
                    continue;
                }
                if (s == l.goal) {
                    mdp.kernel(row, l.terminal) = 1.0;
                    mdp.rewards(s, a) = 1.0;
                    continue;
                }
                const std::array<std::pair<int, double>, 3> outcomes{
                    {{a, 1.0 - p.slip}, {(a + 1) % 4, p.slip / 2.0}, {(a + 3) % 4, p.slip / 2.0}}};
                for (const auto& [d, prob] : outcomes) {
                    if (prob == 0.0) {
                        continue;
                    }
                    const bool on_bridge = r == bridge_row && c >= 1 && c <= l.cols - 2;
                    if (on_bridge && (d == 0 || d == 2)) {
                        mdp.kernel(row, l.terminal) += prob;
                        continue;
                    }
                    int nr = r + moves[static_cast<std::size_t>(d)][0];
                    int nc = c + moves[static_cast<std::size_t>(d)][1];
                    if (nr < 0 || nr >= l.rows || nc < 0 || nc >= l.cols || is_wall(nr, nc)) {
                        nr = r;
                        nc = c;
                    }
                    mdp.kernel(row, l.cell(nr, nc)) += prob;
                }
            }
        }
    }
    for (int a = 0; a < A; ++a) {
        mdp.kernel(mdp.row(l.terminal, a), l.terminal) = 1.0;
    }
    mdp.validate();
    return mdp;
}

TabularMdp chain_world(int n, double stay, double gamma)
{
    if (n < 2 || !(stay >= 0.0 && stay <= 1.0)) {
        throw ConfigError("chain world: need n >= 2 and stay in [0, 1]");
    }
    TabularMdp mdp;
    mdp.n_states = n;
    mdp.n_actions = 2;
    mdp.gamma = gamma;
    mdp.kernel = Kernel::Zero(2 * n, n);
    mdp.rewards = MatrixXd::Zero(n, 2);
    mdp.initial_dist = VectorXd::Zero(n);
    mdp.initial_dist(0) = 1.0;
    for (int s = 0; s < n; ++s) {
        mdp.kernel(mdp.row(s, 0), s) = 1.0;
        const int next = s + 1 < n ? s + 1 : s;
        mdp.kernel(mdp.row(s, 1), s) += stay;
        mdp.kernel(mdp.row(s, 1), next) += 1.0 - stay;
        if (s == n - 1) {
            mdp.rewards(s, 0) = 1.0;
            mdp.rewards(s, 1) = 1.0;
        }
    }
    mdp.validate();
    return mdp;
}

} // namespace rapo
