"""Tabular stochastic games and Markov potential games.

A game holds the tuple ``(N, S, A, P, r, gamma, rho)`` plus an optional
potential ``phi``.  Joint actions are stored flat, row-major over agents with
the last agent varying fastest.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GameParseError, GameValidationError

STOCHASTIC_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GameSpec:
    """An immutable tabular stochastic game.

    Shapes: ``transition`` is ``(S, J, S)``, ``rewards`` is ``(n, S, J)``,
    ``rho`` is ``(S,)``, ``potential`` is ``(S, J)`` or ``None``, where ``J``
    is the number of joint actions.
    """

    states: tuple
    actions: tuple  # per-agent tuples of action labels
    transition: np.ndarray
    rewards: np.ndarray
    gamma: float
    rho: np.ndarray
    potential: np.ndarray | None = None
    identical_interest: bool = False
    potential_given: bool = field(default=False, repr=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "states", tuple(self.states))
        set_(self, "actions", tuple(tuple(a) for a in self.actions))
        set_(self, "gamma", float(self.gamma))
        S, sizes = len(self.states), self.action_sizes
        J = math.prod(sizes)
        if S == 0 or not sizes or min(sizes) == 0:
            raise GameValidationError("game needs at least one state, one agent, one action each")
        P = _frozen(self.transition)
        R = _frozen(self.rewards)
        rho = _frozen(self.rho)
        if P.shape != (S, J, S):
            raise GameValidationError(f"transition has shape {P.shape}, expected {(S, J, S)}")
        if R.shape != (len(sizes), S, J):
            raise GameValidationError(f"rewards have shape {R.shape}, expected {(len(sizes), S, J)}")
        if rho.shape != (S,):
            raise GameValidationError(f"rho has shape {rho.shape}, expected {(S,)}")
        set_(self, "transition", P)
        set_(self, "rewards", R)
        set_(self, "rho", rho)
        if self.potential is not None:
            phi = _frozen(self.potential)
            if phi.shape != (S, J):
                raise GameValidationError(f"potential has shape {phi.shape}, expected {(S, J)}")
            set_(self, "potential", phi)
            set_(self, "potential_given", True)
        elif self.identical_interest:
            set_(self, "potential", R[0])
        for name, arr in (("transition", P), ("rewards", R), ("rho", rho)):
            if not np.all(np.isfinite(arr)):
                raise GameValidationError(f"{name} contains non-finite entries")

    @property
    def n_agents(self) -> int:
        return len(self.actions)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def action_sizes(self) -> tuple:
        return tuple(len(a) for a in self.actions)

    @property
    def n_joint(self) -> int:
        return math.prod(self.action_sizes)

    @property
    def has_potential(self) -> bool:
        return self.potential is not None

    @property
    def phi_min(self) -> float:
        return float(self.potential.min())

    @property
    def phi_max(self) -> float:
        return float(self.potential.max())

    @cached_property
    def model_stack(self) -> np.ndarray:
        """``(S, J, S + n + 1)``: next-state probabilities, rewards, potential.

        Averaging this tensor over the other agents yields, in one pass, the
        induced single-agent transition and every averaged stage cost.
        """
        S, J, n = self.n_states, self.n_joint, self.n_agents
        phi = self.potential if self.potential is not None else np.zeros((S, J))
        out = np.concatenate([self.transition, self.rewards.transpose(1, 2, 0), phi[:, :, None]], axis=2)
        return np.ascontiguousarray(out)


@dataclass(frozen=True)
class JointActionIndex:
    per_agent: tuple
    flat: int


def joint_flatten(game: GameSpec, per_agent) -> JointActionIndex:
    per_agent = tuple(int(a) for a in per_agent)
    sizes = game.action_sizes
    if len(per_agent) != len(sizes) or any(not 0 <= a < m for a, m in zip(per_agent, sizes)):
        raise IndexError(f"joint action {per_agent} out of range for sizes {sizes}")
    return JointActionIndex(per_agent, int(np.ravel_multi_index(per_agent, sizes)))


def joint_unflatten(game: GameSpec, flat: int) -> JointActionIndex:
    if not 0 <= flat < game.n_joint:
        raise IndexError(f"flat joint action {flat} out of range [0, {game.n_joint})")
    per_agent = tuple(int(a) for a in np.unravel_index(flat, game.action_sizes))
    return JointActionIndex(per_agent, int(flat))


# --- validation ---------------------------------------------------------------------


@dataclass
class ValidationReport:
    checks: list  # (name, passed, detail)
    m_bound: float | None  # None when some rho(s) == 0
    visitation_positive_at_uniform: bool
    advisories: list

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.checks)

    def failures(self):
        return [(name, detail) for name, passed, detail in self.checks if not passed]

    def to_dict(self):
        return {
            "ok": self.ok,
            "checks": [{"name": n, "passed": bool(p), "detail": d} for n, p, d in self.checks],
            "m_bound": self.m_bound,
            "m_bound_unbounded": self.m_bound is None,
            "visitation_positive_at_uniform": self.visitation_positive_at_uniform,
            "advisories": list(self.advisories),
        }


def validate_game(game: GameSpec) -> ValidationReport:
    checks = []
    P = game.transition
    row_err = float(np.abs(P.sum(axis=2) - 1.0).max())
    checks.append(("transition rows sum to 1", row_err <= STOCHASTIC_TOL, f"max deviation {row_err:.3e}"))
    checks.append(("transition entries nonnegative", bool((P >= 0).all()), f"min entry {P.min():.3e}"))
    rho_err = abs(float(game.rho.sum()) - 1.0)
    checks.append(("rho sums to 1", rho_err <= STOCHASTIC_TOL, f"deviation {rho_err:.3e}"))
    checks.append(("rho nonnegative", bool((game.rho >= 0).all()), f"min entry {game.rho.min():.3e}"))
    checks.append(("0 <= gamma < 1", 0.0 <= game.gamma < 1.0, f"gamma = {game.gamma!r}"))
    all_equal = bool(np.all(game.rewards == game.rewards[0]))
    if game.identical_interest:
        checks.append(("identical-interest rewards equal", all_equal, ""))
    if game.potential is not None:
        checks.append(("potential finite", bool(np.isfinite(game.potential).all()), ""))

    advisories = []
    if all_equal and not game.identical_interest and game.n_agents > 1:
        advisories.append("all reward tensors are equal; consider marking the game identical-interest")

    m_bound = None
    if (game.rho > 0).all() and game.gamma < 1.0:
        m_bound = float(np.max(1.0 / ((1.0 - game.gamma) * game.rho)))

    positive = False
    if all(passed for _, passed, _ in checks):
        from .evaluation import visitation
        from .policy import softmax_policy, uniform_params

        d = visitation(game, softmax_policy(uniform_params(game)))
        positive = bool((d > 0).all())
        if not positive:
            advisories.append("some state has zero visitation under the uniform policy")
    return ValidationReport(checks, m_bound, positive, advisories)


# --- generation -----------------------------------------------------------------------


def random_identical_interest_game(seed: int, sizes, gamma: float) -> GameSpec:
    """Seeded random identical-interest game; ``sizes = (n, S, [A_1, ..., A_n])``."""
    n, S, A = sizes
    A = list(A)
    if n < 1 or S < 1 or len(A) != n or min(A) < 1:
        raise ValueError(f"bad sizes {sizes!r}")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    J = math.prod(A)
    P = rng.uniform(0.05, 1.0, size=(S, J, S))
    P /= P.sum(axis=2, keepdims=True)
    r = rng.uniform(0.0, 1.0, size=(S, J))
    rho = rng.uniform(0.05, 1.0, size=S)
    rho /= rho.sum()
    return GameSpec(
        states=[f"s{k}" for k in range(S)],
        actions=[[f"a{k}" for k in range(m)] for m in A],
        transition=P,
        rewards=np.broadcast_to(r, (n, S, J)),
        gamma=gamma,
        rho=rho,
        identical_interest=True,
    )


FIGURE1_REWARDS = np.array([[-1.0, 0.14], [0.16, 0.15], [0.2, -1.0]])


def figure1_game() -> GameSpec:
    """The two-player identical-reward matrix game, as a one-state game with gamma = 0."""
    r = FIGURE1_REWARDS.reshape(1, 6)
    return GameSpec(
        states=["s0"],
        actions=[["1", "2", "3"], ["1", "2"]],
        transition=np.ones((1, 6, 1)),
        rewards=np.broadcast_to(r, (2, 1, 6)),
        gamma=0.0,
        rho=[1.0],
        identical_interest=True,
    )


BUILTIN_GAMES = {"figure1": figure1_game}


# --- file format ----------------------------------------------------------------------


def _require(doc, key):
    if key not in doc:
        raise GameParseError(f"missing field {key!r}")
    return doc[key]


def parse_game(text: str) -> GameSpec:
    """Parse a game document into a GameSpec without running numeric validation."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise GameParseError("game document must be a JSON object")
    agents = _require(doc, "agents")
    try:
        actions = [list(a["actions"]) for a in agents]
    except (TypeError, KeyError) as exc:
        raise GameParseError("each agent needs an 'actions' list") from exc
    rewards = _require(doc, "rewards")
    n = len(actions)
    try:
        if isinstance(rewards, dict) and "identical" in rewards:
            r = np.asarray(rewards["identical"], dtype=np.float64)
            R, identical = np.broadcast_to(r, (n,) + r.shape), True
        elif isinstance(rewards, dict) and "per_agent" in rewards:
            R, identical = np.asarray(rewards["per_agent"], dtype=np.float64), False
        else:
            raise GameParseError("rewards must be {'identical': ...} or {'per_agent': ...}")
        P = np.asarray(_require(doc, "transitions"), dtype=np.float64)
        rho = np.asarray(_require(doc, "rho"), dtype=np.float64)
        phi = doc.get("potential")
        phi = None if phi is None else np.asarray(phi, dtype=np.float64)
        gamma = float(_require(doc, "gamma"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, GameValidationError):
            raise
        raise GameParseError(f"malformed numeric array: {exc}") from exc
    states = doc.get("states") or [f"s{k}" for k in range(len(rho))]
    return GameSpec(
        states=states,
        actions=actions,
        transition=P,
        rewards=R,
        gamma=gamma,
        rho=rho,
        potential=phi,
        identical_interest=identical,
    )


def load_game(text: str) -> GameSpec:
    game = parse_game(text)
    report = validate_game(game)
    if not report.ok:
        msgs = "; ".join(f"{name} ({detail})" for name, detail in report.failures())
        raise GameValidationError(f"invalid game: {msgs}")
    return game


def game_to_dict(game: GameSpec) -> dict:
    doc = {
        "gamma": game.gamma,
        "rho": game.rho.tolist(),
        "states": list(game.states),
        "agents": [{"actions": list(a)} for a in game.actions],
        "transitions": game.transition.tolist(),
    }
    if game.identical_interest:
        doc["rewards"] = {"identical": game.rewards[0].tolist()}
    else:
        doc["rewards"] = {"per_agent": game.rewards.tolist()}
    if game.potential_given:
        doc["potential"] = game.potential.tolist()
    return doc


def dump_game(game: GameSpec) -> str:
    return json.dumps(game_to_dict(game), indent=2)


def resolve_game(ref: str) -> GameSpec:
    """Load a game from a path, or a built-in id such as ``figure1``."""
    key = ref.removeprefix("builtin:")
    if key in BUILTIN_GAMES:
        return BUILTIN_GAMES[key]()
    with open(ref) as f:
        return load_game(f.read())
