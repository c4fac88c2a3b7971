"""Nominal value iteration on an MDP JSON file; writes state,value,action CSV.

Independent reference for `rapo solve-mdp --epsilon 0`. Ties go to the lowest action index.
"""
import argparse
import json

import numpy as np


def value_iteration(kernel, rewards, gamma, tol=1e-12):
    n_states, n_actions = rewards.shape
    p = kernel.reshape(n_states, n_actions, n_states)
    v = np.zeros(n_states)
    while True:
        q = rewards + gamma * p @ v
        v_new = q.max(axis=1)
        if np.max(np.abs(v_new - v)) < tol:
            return v_new, q.argmax(axis=1)
        v = v_new


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("mdp")
    ap.add_argument("out")
    args = ap.parse_args()
    with open(args.mdp) as f:
        doc = json.load(f)
    v, pi = value_iteration(np.array(doc["kernel"]), np.array(doc["rewards"]), doc["gamma"])
    with open(args.out, "w", newline="\n") as f:
        f.write("state,value,action\n")
        for s, (val, a) in enumerate(zip(v, pi)):
            f.write(f"{s},{val:.9g},{a}\n")


if __name__ == "__main__":
    main()
