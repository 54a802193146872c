import itertools

import numpy as np
import pytest

from mpgplay import kernels
from mpgplay.game import GameSpec, figure1_game, random_identical_interest_game


def oracle_grid(count=20, seed=1000):
    """Seeded random identical-interest games spanning n in {2, 3}, |S| in {1, 2, 3},
    |A_i| in {2, 3} and gamma in {0, 0.5, 0.9}."""
    rng = np.random.default_rng(seed)
    shapes = list(itertools.product([2, 3], [1, 2, 3], [0.0, 0.5, 0.9]))
    games = []
    for k in range(count):
        n, S, gamma = shapes[k % len(shapes)]
        A = [int(x) for x in rng.integers(2, 4, size=n)]
        games.append(random_identical_interest_game(seed + k, (n, S, A), gamma))
    return games


def chain_game(gamma=0.5, rho=(1.0, 0.0)):
    """Two states, one agent with one action: s0 -> s1 -> s1."""
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 1] = 1.0
    return GameSpec(
        states=["s0", "s1"],
        actions=[["stay"]],
        transition=P,
        rewards=np.array([[[1.0], [0.0]]]),
        gamma=gamma,
        rho=rho,
        identical_interest=True,
    )


def constant_game(sizes=(2, 2), value=0.5):
    J = int(np.prod(sizes))
    return GameSpec(
        states=["s0"],
        actions=[[str(k) for k in range(m)] for m in sizes],
        transition=np.ones((1, J, 1)),
        rewards=np.full((len(sizes), 1, J), value),
        gamma=0.0,
        rho=[1.0],
        identical_interest=True,
    )


@pytest.fixture
def fig1():
    return figure1_game()


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    prev = kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(prev)


@pytest.fixture(scope="session")
def figure1_runs():
    """The four built-in matrix-game trajectories (eta 5, lambda 0.003, uniform start), run once."""
    from mpgplay.cli import figure1_configs
    from mpgplay.dynamics import run_trajectory

    import time

    game = figure1_game()
    t0 = time.perf_counter()
    runs = RunSet({name: run_trajectory(game, cfg) for name, cfg in figure1_configs().items()})
    runs.seconds = time.perf_counter() - t0
    return runs


class RunSet(dict):
    seconds = None


# criterion number -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(str(k).rstrip("abcdt")), str(k))):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
