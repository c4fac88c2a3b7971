#ifndef RAPO_GRIDWORLD_HPP
#define RAPO_GRIDWORLD_HPP

#include "rapo/mdp.hpp"

namespace rapo
{

/// Slippery bridge world.
///
///   corridor rows   . . . . . .
///   wall row        . # # # # .
///   bridge row      S . . . . G
///
/// Actions up/right/down/left. The intended move happens with probability 1 - slip, each
/// perpendicular move with slip / 2. Any move off the bridge interior (up into the wall side
/// or down off the edge) falls into the absorbing terminal. G pays 1 and moves to the terminal.
/// The short bridge path is exposed to slip; the corridor detour is safe but longer.
struct BridgeParams
{
    int length = 5;
    int corridor_rows = 1;
    double slip = 0.15;
    double gamma = 0.90;
};

struct BridgeLayout
{
    int rows = 0;
    int cols = 0;
    int start = 0;
    int goal = 0;
    int terminal = 0;
    int cell(int r, int c) const { return r * cols + c; }
};

BridgeLayout bridge_layout(const BridgeParams& p);
TabularMdp bridge_world(const BridgeParams& p);

/// n-state chain: action 0 stays, action 1 moves right with probability 1 - stay (else stays).
/// The last state pays 1 per step.
TabularMdp chain_world(int n, double stay, double gamma);

} // namespace rapo

#endif
