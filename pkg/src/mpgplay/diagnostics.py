"""Equilibrium and convergence diagnostics.

NE-gaps come from exact best responses: the other agents' policies are folded
into a single-agent MDP, which policy iteration solves to a stable
deterministic policy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingPotentialError, SearchSpaceTooLarge
from .evaluation import EvalBundle, _as_table, barrier_gradient, barrier_term, evaluate
from .game import GameSpec
from .policy import PolicyParams, PolicyTable, deterministic_table, random_params, softmax_policy

TIE_TOL = 1e-9
NE_TOL = 1e-9
ASCENT_TOL = 1e-9
BRUTE_FORCE_LIMIT = 10**6
DEVIATION_PAIR_LIMIT = 20000

ALGORITHMS = ("GP", "NPG", "GP-logbar", "NPG-logbar")


# --- best responses -------------------------------------------------------------------


def solve_mdp(P, r, gamma, init=None, max_iter=10000):
    """Policy iteration on a finite discounted MDP.

    ``P`` is ``(S, A, S)``, ``r`` is ``(S, A)``.  Switches action only on a
    strict improvement beyond round-off, so it terminates at a stable policy.
    Returns ``(V, sigma, Q)``.
    """
    S, _ = r.shape
    idx = np.arange(S)
    sigma = np.asarray(init, dtype=int).copy() if init is not None else r.argmax(axis=1)
    eye = np.eye(S)
    for _ in range(max_iter):
        V = np.linalg.solve(eye - gamma * P[idx, sigma], r[idx, sigma])
        Q = r + gamma * (P @ V)
        best = Q.argmax(axis=1)
        tol = 1e-12 * max(1.0, float(np.abs(Q).max()))
        improve = Q[idx, best] > Q[idx, sigma] + tol
        if not improve.any():
            return V, sigma, Q
        sigma = np.where(improve, best, sigma)
    raise RuntimeError("policy iteration did not stabilize")


@dataclass
class BestResponse:
    value: float
    actions: np.ndarray  # per-state action index of the deterministic best response
    V: np.ndarray


def best_response(game: GameSpec, table, i: int, bundle: EvalBundle | None = None) -> BestResponse:
    """Agent ``i``'s optimal value against the others' current policies."""
    if bundle is None:
        bundle = evaluate(game, _as_table(table))
    S, n = game.n_states, game.n_agents
    induced = bundle.induced[i]
    P = induced[:, :, :S]
    r = induced[:, :, S + i]
    V, sigma, _ = solve_mdp(P, r, game.gamma, init=bundle.Qbar[i].argmax(axis=1))
    return BestResponse(float(game.rho @ V), sigma, V)


@dataclass
class NEGap:
    per_agent: np.ndarray
    best_values: np.ndarray
    current_values: np.ndarray

    @property
    def max(self) -> float:
        return float(self.per_agent.max())


def ne_gap(game: GameSpec, table, bundle: EvalBundle | None = None) -> NEGap:
    if bundle is None:
        bundle = evaluate(game, _as_table(table))
    best = np.array([best_response(game, None, i, bundle).value for i in range(game.n_agents)])
    return NEGap(best - bundle.J, best, bundle.J.copy())


# --- Lojasiewicz quantities -----------------------------------------------------------


def c_theta(game: GameSpec, table, tie_tol: float = TIE_TOL, bundle: EvalBundle | None = None):
    """Mass on greedy actions of the averaged Q; returns ``(min_i c_i, [c_i])``."""
    if tie_tol < 0:
        raise ValueError("tie_tol must be nonnegative")
    if bundle is None:
        bundle = evaluate(game, _as_table(table))
    per = []
    for qb, p in zip(bundle.Qbar, bundle.table.pi):
        greedy = qb >= qb.max(axis=1, keepdims=True) - tie_tol
        per.append(float((p * greedy).sum(axis=1).min()))
    return min(per), per


def m_theta(game: GameSpec, table, bundle: EvalBundle | None = None) -> float:
    d = bundle.d if bundle is not None else evaluate(game, _as_table(table)).d
    return float(np.max(1.0 / d))


@dataclass
class LojasiewiczResult:
    lhs: float
    rhs: float
    holds: bool


def _lojasiewicz(game, bundle, gap, c_per, M, atol=1e-9):
    out = []
    for i in range(game.n_agents):
        gnorm = float(np.linalg.norm(bundle.gradient(i)))
        ci = c_per[i]
        rhs = math.sqrt(game.action_sizes[i]) * M * gnorm / ci if ci > 0 else math.inf
        lhs = float(gap.per_agent[i])
        out.append(LojasiewiczResult(lhs, rhs, lhs <= rhs + atol))
    return out


def lojasiewicz_check(game: GameSpec, params, tie_tol: float = TIE_TOL):
    """Per-agent NE-gap_i <= sqrt(|A_i|) M(theta) / c_i(theta) * ||grad_i J_i||."""
    bundle = evaluate(game, params)
    gap = ne_gap(game, None, bundle)
    _, c_per = c_theta(game, None, tie_tol, bundle)
    return _lojasiewicz(game, bundle, gap, c_per, m_theta(game, None, bundle))


# --- per-iterate record ---------------------------------------------------------------


@dataclass
class DiagnosticsRecord:
    ne_gap_per_agent: list
    ne_gap_max: float
    c_theta: float
    c_per_agent: list
    m_theta: float
    grad_norm: float
    phi: float
    phi_reg: float
    lojasiewicz_lhs: list
    lojasiewicz_rhs: list
    lojasiewicz_holds: list
    min_policy_entry: float

    def to_dict(self):
        return dict(self.__dict__)


def diagnose(game: GameSpec, bundle: EvalBundle, params: PolicyParams | None = None,
             lam: float = 0.0, tie_tol: float = TIE_TOL) -> DiagnosticsRecord:
    if bundle.Phi is None:
        raise MissingPotentialError("diagnostics need a potential (or an identical-interest game)")
    gap = ne_gap(game, None, bundle)
    c, c_per = c_theta(game, None, tie_tol, bundle)
    M = m_theta(game, None, bundle)
    loj = _lojasiewicz(game, bundle, gap, c_per, M)
    grad_norm = float(math.sqrt(sum(float((g * g).sum()) for g in bundle.gradients())))
    if lam > 0:
        logs = barrier_term(params) if params is not None else float(sum(np.log(p).sum() for p in bundle.table.pi))
        phi_reg = bundle.Phi + lam * logs
    else:
        phi_reg = bundle.Phi
    return DiagnosticsRecord(
        ne_gap_per_agent=gap.per_agent.tolist(),
        ne_gap_max=gap.max,
        c_theta=c,
        c_per_agent=c_per,
        m_theta=M,
        grad_norm=grad_norm,
        phi=bundle.Phi,
        phi_reg=float(phi_reg),
        lojasiewicz_lhs=[r.lhs for r in loj],
        lojasiewicz_rhs=[r.rhs for r in loj],
        lojasiewicz_holds=[r.holds for r in loj],
        min_policy_entry=float(min(p.min() for p in bundle.table.pi)),
    )


# --- pure Nash equilibria -------------------------------------------------------------


@dataclass
class PureNE:
    actions: tuple  # actions[i][s]
    values: list  # J_i per agent

    def to_dict(self, game: GameSpec | None = None):
        out = {"actions": [list(map(int, a)) for a in self.actions], "values": list(self.values)}
        if game is not None:
            out["action_labels"] = [
                [game.actions[i][a] for a in acts] for i, acts in enumerate(self.actions)
            ]
        return out


def _deterministic_profiles(game):
    per_agent = [list(itertools.product(range(m), repeat=game.n_states)) for m in game.action_sizes]
    return itertools.product(*per_agent)


def n_deterministic_profiles(game: GameSpec) -> int:
    return math.prod(m ** game.n_states for m in game.action_sizes)


def brute_force_pure_ne(game: GameSpec, limit: int = BRUTE_FORCE_LIMIT, tol: float = NE_TOL):
    """Enumerate deterministic joint policies and keep those with zero NE-gap."""
    count = n_deterministic_profiles(game)
    if count > limit:
        raise SearchSpaceTooLarge(f"{count} deterministic profiles exceeds the limit of {limit}")
    found = []
    for profile in _deterministic_profiles(game):
        bundle = evaluate(game, deterministic_table(game, profile))
        gap = ne_gap(game, None, bundle)
        if (gap.per_agent <= tol).all():
            found.append(PureNE(tuple(profile), bundle.J.tolist()))
    return found


# --- potential property ---------------------------------------------------------------


@dataclass
class PotentialReport:
    max_violation: float
    n_random: int
    n_deterministic: int
    tol: float
    worst: str = ""

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tol

    def to_dict(self):
        return {
            "ok": self.ok,
            "max_violation": self.max_violation,
            "n_random": self.n_random,
            "n_deterministic": self.n_deterministic,
            "tol": self.tol,
            "worst": self.worst,
        }


def _values_and_potential(game, table):
    bundle = evaluate(game, table)
    return bundle.V, bundle.V_phi


def validate_potential_property(game: GameSpec, samples: int = 100, seed: int = 0,
                                tol: float = 1e-8) -> PotentialReport:
    """Check the unilateral-deviation identity V_i' - V_i == V_phi' - V_phi per start state."""
    if not game.has_potential:
        raise MissingPotentialError("game has no potential function")
    rng = np.random.default_rng(seed)
    worst, where = 0.0, ""

    for k in range(samples):
        i = int(rng.integers(game.n_agents))
        base = random_params(game, rng)
        dev = base.replace_agent(i, rng.standard_normal(base.theta[i].shape))
        V0, F0 = _values_and_potential(game, softmax_policy(base))
        V1, F1 = _values_and_potential(game, softmax_policy(dev))
        v = float(np.abs((V1[i] - V0[i]) - (F1 - F0)).max())
        if v > worst:
            worst, where = v, f"random sample {k}, agent {i}"

    n_det = 0
    per_agent_choices = [list(itertools.product(range(m), repeat=game.n_states)) for m in game.action_sizes]
    pairs = n_deterministic_profiles(game) * sum(len(c) - 1 for c in per_agent_choices)
    if pairs <= DEVIATION_PAIR_LIMIT:
        cache = {}
        for profile in _deterministic_profiles(game):
            cache[profile] = _values_and_potential(game, deterministic_table(game, profile))
        for profile, (V0, F0) in cache.items():
            for i, choices in enumerate(per_agent_choices):
                for alt in choices:
                    if alt == profile[i]:
                        continue
                    other = profile[:i] + (alt,) + profile[i + 1:]
                    V1, F1 = cache[other]
                    v = float(np.abs((V1[i] - V0[i]) - (F1 - F0)).max())
                    n_det += 1
                    if v > worst:
                        worst, where = v, f"deterministic profile {profile}, agent {i} -> {alt}"
    return PotentialReport(worst, samples, n_det, tol, where)


# --- sufficient-ascent certificates ---------------------------------------------------


@dataclass
class AscentReport:
    algorithm: str
    delta: float  # actual change of Phi (or regularized Phi for log-barrier schemes)
    bound: float  # the scheme's guaranteed lower bound on delta
    min_z: float | None  # min over (i, s) of Z_t^{i,s}; NPG schemes only
    ratio_range: tuple  # range of pi_{t+1}/pi_t - 1
    direction_range: tuple  # range of the untruncated per-entry update direction
    tol: float = ASCENT_TOL
    notes: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.delta >= self.bound - self.tol

    def to_dict(self):
        out = dict(self.__dict__)
        out["holds"] = self.holds
        return out


def _logsumexp_rows(x):
    m = x.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(x - m).sum(axis=1, keepdims=True)))[:, 0]


def npg_logbar_direction(bundle: EvalBundle, i: int, lam: float) -> np.ndarray:
    """Abar_i / (1 - gamma) + lam / (d pi_i) - lam |A_i| / d."""
    p = bundle.table.pi[i]
    d = bundle.d[:, None]
    return bundle.Abar[i] / (1.0 - bundle.gamma) + lam / (d * p) - lam * p.shape[1] / d


def potential_gradient(bundle: EvalBundle, i: int) -> np.ndarray:
    return bundle.d[:, None] * bundle.table.pi[i] * bundle.Abar_phi[i] / (1.0 - bundle.gamma)


def _phi_reg(bundle, params, lam):
    return bundle.Phi + (lam * barrier_term(params) if lam > 0 else 0.0)


def ascent_from_bundles(game: GameSpec, b0: EvalBundle, b1: EvalBundle, p0: PolicyParams,
                        p1: PolicyParams, algorithm: str, eta: float, lam: float = 0.0,
                        M: float | None = None) -> AscentReport:
    if b0.Phi is None:
        raise MissingPotentialError("ascent certificates need a potential")
    n, g = game.n_agents, game.gamma
    ratios = [p_new / p_old - 1.0 for p_old, p_new in zip(b0.table.pi, b1.table.pi)]
    ratio_range = (float(min(r.min() for r in ratios)), float(max(r.max() for r in ratios)))
    min_z, notes = None, []

    if algorithm == "GP":
        dirs = [potential_gradient(b0, i) for i in range(n)]
        delta = b1.Phi - b0.Phi
        bound = 0.5 * eta * sum(float((x * x).sum()) for x in dirs)
    elif algorithm == "GP-logbar":
        dirs = [potential_gradient(b0, i) + barrier_gradient(b0.table.pi[i], lam) for i in range(n)]
        delta = _phi_reg(b1, p1, lam) - _phi_reg(b0, p0, lam)
        bound = 0.5 * eta * sum(float((x * x).sum()) for x in dirs)
    elif algorithm == "NPG":
        dirs = [b0.Abar[i] / (1.0 - g) for i in range(n)]
        logz = [_logsumexp_rows(np.log(b0.table.pi[i]) + eta * dirs[i]) for i in range(n)]
        min_z = float(min(np.exp(z).min() for z in logz))
        delta = b1.Phi - b0.Phi
        bound = sum(float(b1.d @ z) for z in logz) / eta
    elif algorithm == "NPG-logbar":
        if M is None:
            M = float(np.max(1.0 / b0.d))
            notes.append("M taken from the current visitation; not a certified sup")
        dirs = [npg_logbar_direction(b0, i, lam) for i in range(n)]
        logz = [_logsumexp_rows(np.log(b0.table.pi[i]) + eta * dirs[i]) for i in range(n)]
        min_z = float(min(np.exp(z).min() for z in logz))
        amax = max(game.action_sizes)
        coef = (1.0 / (2.0 * eta) - 4.0 * lam * amax * M ** 2 - 4.0 * M / (1.0 - g) ** 2
                - 3.0 * n * M / (1.0 - g) ** 3)
        weighted = sum(float((b0.d[:, None] * b0.table.pi[i] * ratios[i] ** 2).sum()) for i in range(n))
        delta = _phi_reg(b1, p1, lam) - _phi_reg(b0, p0, lam)
        bound = coef * weighted
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    direction_range = (float(min(x.min() for x in dirs)), float(max(x.max() for x in dirs)))
    return AscentReport(algorithm, float(delta), float(bound), min_z, ratio_range, direction_range, notes=notes)


def ascent_check(game: GameSpec, params_before: PolicyParams, params_after: PolicyParams,
                 algorithm: str, eta: float, lam: float = 0.0, M: float | None = None) -> AscentReport:
    """Compare the realised potential ascent of one step with the scheme's lower bound."""
    b0 = evaluate(game, params_before)
    b1 = evaluate(game, params_after)
    return ascent_from_bundles(game, b0, b1, params_before, params_after, algorithm, eta, lam, M)
