"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times the joint-policy and marginalization kernels on a few game sizes, then a
short NPG trajectory end to end, under each available backend.
"""

import argparse
import timeit

import numpy as np

from mpgplay import kernels
from mpgplay.dynamics import RunConfig, run_trajectory
from mpgplay.game import random_identical_interest_game
from mpgplay.policy import random_params, softmax_policy

SIZES = [(2, 1, [3, 2]), (3, 4, [3, 3, 3]), (4, 6, [4, 3, 3, 2]), (8, 2, [2] * 8)]


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(repeat):
    rows = []
    for sizes in SIZES:
        game = random_identical_interest_game(0, sizes, 0.9)
        pis = list(softmax_policy(random_params(game, 1)).pi)
        X = game.model_stack
        for backend in kernels.available_backends():
            kernels.set_backend(backend)
            tj = _time(lambda: kernels.joint_policy(pis), repeat)
            tm = _time(lambda: [kernels.marginalize(X, pis, i) for i in range(game.n_agents)], repeat)
            rows.append((sizes, backend, tj, tm))
    return rows


def bench_trajectory(repeat, steps=200):
    game = random_identical_interest_game(0, (3, 4, [3, 3, 3]), 0.9)
    config = RunConfig("NPG", eta=0.1, T=steps, record_every=steps)
    out = []
    for backend in kernels.available_backends():
        kernels.set_backend(backend)
        out.append((backend, _time(lambda: run_trajectory(game, config), max(1, repeat // 5))))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    previous = kernels.BACKEND
    try:
        print(f"{'game (n, S, A)':<34}{'backend':<9}{'joint [us]':>12}{'marginals [us]':>16}")
        for sizes, backend, tj, tm in bench_kernels(args.repeat):
            label = f"{sizes[0]}, {sizes[1]}, {sizes[2]}"
            print(f"{label:<34}{backend:<9}{tj * 1e6:>12.1f}{tm * 1e6:>16.1f}")
        print()
        for backend, t in bench_trajectory(args.repeat):
            print(f"NPG trajectory, 200 steps, {backend:<7}: {t * 1e3:8.1f} ms")
    finally:
        kernels.set_backend(previous)


if __name__ == "__main__":
    main()
