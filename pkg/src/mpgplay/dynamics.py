"""Update schemes and the trajectory runner.

All four schemes are additive updates of the softmax logits.  The natural
variants add their soft-Q exponent directly; the discarded normalizer is a
per-state constant that softmax ignores.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import ALGORITHMS, TIE_TOL, ascent_from_bundles, c_theta, diagnose, npg_logbar_direction
from .errors import InvalidConfigError, MissingPotentialError, NumericalBlowUp
from .evaluation import EvalBundle, barrier_gradient, evaluate
from .game import GameSpec
from .policy import PolicyParams, load_policy, random_params, uniform_params

_CANONICAL = {a.lower(): a for a in ALGORITHMS}
_DEFAULT = "default"


def canonical_algorithm(name: str) -> str:
    try:
        return _CANONICAL[str(name).lower()]
    except KeyError:
        raise InvalidConfigError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}") from None


# --- configuration --------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """One trajectory's settings.

    ``truncation`` left at its default resolves to 1.0 for NPG-logbar and to
    no clipping otherwise; pass ``None`` to disable it explicitly.
    ``init`` is ``"uniform"``, ``"random"`` (uses ``seed``) or a policy file.
    """

    algorithm: str
    eta: float | str = "theory"
    lam: float = 0.0
    T: int = 1000
    truncation: float | str | None = _DEFAULT
    record_every: int = 1
    init: str = "uniform"
    seed: int | None = None
    M: float | None = None
    game: str | None = None

    def __post_init__(self):
        alg = canonical_algorithm(self.algorithm)
        object.__setattr__(self, "algorithm", alg)
        if isinstance(self.eta, str):
            if self.eta != "theory":
                raise InvalidConfigError(f"eta must be a positive number or 'theory', got {self.eta!r}")
        elif not (math.isfinite(self.eta) and self.eta > 0):
            raise InvalidConfigError("eta must be > 0")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidConfigError("lambda must be >= 0")
        if isinstance(self.T, bool) or int(self.T) != self.T or self.T < 1:
            raise InvalidConfigError("T must be an integer >= 1")
        object.__setattr__(self, "T", int(self.T))
        if isinstance(self.record_every, bool) or int(self.record_every) != self.record_every or self.record_every < 1:
            raise InvalidConfigError("record_every must be an integer >= 1")
        object.__setattr__(self, "record_every", int(self.record_every))
        trunc = self.truncation
        if trunc == _DEFAULT:
            trunc = 1.0 if alg == "NPG-logbar" else None
        if trunc is not None:
            if isinstance(trunc, str) or not trunc > 0:
                raise InvalidConfigError("truncation must be > 0 when present")
            trunc = float(trunc)
        object.__setattr__(self, "truncation", trunc)
        if self.init not in ("uniform", "random") and not isinstance(self.init, str):
            raise InvalidConfigError("init must be 'uniform', 'random' or a policy path")
        if self.init == "random" and self.seed is None:
            raise InvalidConfigError("init 'random' needs a seed")
        if self.M is not None and not self.M >= 1:
            raise InvalidConfigError("M must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {"algorithm", "eta", "lambda", "lam", "T", "truncation", "record_every", "init", "seed", "M", "game"}
        extra = set(doc) - known
        if extra:
            raise InvalidConfigError(f"unknown config keys: {sorted(extra)}")
        if "algorithm" not in doc:
            raise InvalidConfigError("config needs an 'algorithm'")
        kw = {k: doc[k] for k in ("algorithm", "eta", "T", "record_every", "init", "seed", "M", "game") if k in doc}
        if "lambda" in doc or "lam" in doc:
            kw["lam"] = float(doc.get("lambda", doc.get("lam")))
        if "truncation" in doc:
            kw["truncation"] = doc["truncation"]
        try:
            return cls(**kw)
        except TypeError as exc:
            raise InvalidConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "eta": self.eta,
            "lambda": self.lam,
            "T": self.T,
            "truncation": self.truncation,
            "record_every": self.record_every,
            "init": self.init,
            "seed": self.seed,
            "M": self.M,
            "game": self.game,
        }


# --- stepsizes ------------------------------------------------------------------------


@dataclass
class StepsizeReport:
    n_agents: int
    gamma: float
    lam: float
    max_actions: int
    phi_range: float
    M: float | None
    eta_gp: float
    eta_npg: float | None  # None: unconstrained (constant potential)
    eta_gp_logbar: float
    eta_npg_logbar: float | None  # None when M is unbounded
    beta: float
    beta_reg: float

    def to_dict(self):
        return dict(self.__dict__)


def m_bound(game: GameSpec) -> float | None:
    """max_s 1 / ((1 - gamma) rho(s)); an upper bound on M(theta) for every policy."""
    if (game.rho <= 0).any():
        return None
    return float(np.max(1.0 / ((1.0 - game.gamma) * game.rho)))


def theory_stepsizes(game: GameSpec, lam: float = 0.0, M: float | None = None) -> StepsizeReport:
    if not game.has_potential:
        raise MissingPotentialError("theory stepsizes need a potential")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    n, g = game.n_agents, game.gamma
    amax = max(game.action_sizes)
    h = 1.0 - g
    if M is None:
        M = m_bound(game)
    spread = game.phi_max - game.phi_min
    eta_npg = h ** 2 / (2 * n * spread) if spread > 0 else None
    if M is None or not math.isfinite(M):
        eta4 = None
    else:
        first = 1.0 / (15.0 * (1.0 / h ** 2 + lam * amax * M))
        second = 1.0 / (4.0 * (4.0 * lam * amax * M ** 2 + 4.0 * M / h ** 2 + 3.0 * n * M / h ** 3))
        eta4 = min(first, second)
    beta = 6.0 * n / h ** 3
    return StepsizeReport(
        n_agents=n,
        gamma=g,
        lam=lam,
        max_actions=amax,
        phi_range=spread,
        M=M,
        eta_gp=h ** 3 / (6.0 * n),
        eta_npg=eta_npg,
        eta_gp_logbar=h ** 3 / (6.0 * n + 2.0 * lam * amax * h ** 3),
        eta_npg_logbar=eta4,
        beta=beta,
        beta_reg=beta + 2.0 * lam * amax,
    )


def probability_floor(game: GameSpec, lam: float, M: float, i: int) -> float:
    """Lower bound on agent ``i``'s probabilities under the log-barrier natural scheme."""
    return lam / (4.0 * (lam * game.action_sizes[i] * M + 1.0 / (1.0 - game.gamma) ** 2))


def resolve_eta(game: GameSpec, config: RunConfig) -> float:
    if config.eta != "theory":
        return float(config.eta)
    rep = theory_stepsizes(game, config.lam, config.M)
    eta = {
        "GP": rep.eta_gp,
        "NPG": rep.eta_npg,
        "GP-logbar": rep.eta_gp_logbar,
        "NPG-logbar": rep.eta_npg_logbar,
    }[config.algorithm]
    if eta is None:
        raise InvalidConfigError(f"no theory stepsize for {config.algorithm} on this game; give eta explicitly")
    return eta


# --- steps ----------------------------------------------------------------------------


def _apply(params: PolicyParams, deltas) -> PolicyParams:
    new = []
    for t, dlt in zip(params.theta, deltas):
        x = t + dlt
        if not np.isfinite(x).all():
            raise NumericalBlowUp(None, "policy parameters became non-finite")
        new.append(x)
    return PolicyParams(tuple(new))


def _bundle(game, params, bundle):
    return bundle if bundle is not None else evaluate(game, params)


def gradient_play_step(game: GameSpec, params: PolicyParams, eta: float,
                       bundle: EvalBundle | None = None) -> PolicyParams:
    if not eta > 0:
        raise ValueError("eta must be > 0")
    b = _bundle(game, params, bundle)
    return _apply(params, [eta * g for g in b.gradients()])


def npg_step(game: GameSpec, params: PolicyParams, eta: float,
             bundle: EvalBundle | None = None) -> PolicyParams:
    if not eta > 0:
        raise ValueError("eta must be > 0")
    b = _bundle(game, params, bundle)
    return _apply(params, [eta * a / (1.0 - b.gamma) for a in b.Abar])


def log_barrier_gp_step(game: GameSpec, params: PolicyParams, eta: float, lam: float,
                        bundle: EvalBundle | None = None) -> PolicyParams:
    if not eta > 0 or lam < 0:
        raise ValueError("need eta > 0 and lambda >= 0")
    b = _bundle(game, params, bundle)
    if lam == 0:
        return gradient_play_step(game, params, eta, b)
    return _apply(params, [eta * (g + barrier_gradient(p, lam)) for g, p in zip(b.gradients(), b.table.pi)])


def log_barrier_npg_step(game: GameSpec, params: PolicyParams, eta: float, lam: float,
                         trunc: float | None = None, bundle: EvalBundle | None = None) -> PolicyParams:
    if not eta > 0 or lam < 0:
        raise ValueError("need eta > 0 and lambda >= 0")
    if trunc is not None and not trunc > 0:
        raise ValueError("truncation must be > 0")
    b = _bundle(game, params, bundle)
    if lam == 0 and trunc is None:
        return npg_step(game, params, eta, b)
    deltas = []
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for i in range(game.n_agents):
            e = eta * npg_logbar_direction(b, i, lam)
            if trunc is not None:
                e = np.clip(e, -trunc, trunc)
            deltas.append(e)
    return _apply(params, deltas)


def step(game: GameSpec, params: PolicyParams, algorithm: str, eta: float, lam: float = 0.0,
         trunc: float | None = None, bundle: EvalBundle | None = None) -> PolicyParams:
    alg = canonical_algorithm(algorithm)
    if alg == "GP":
        return gradient_play_step(game, params, eta, bundle)
    if alg == "NPG":
        return npg_step(game, params, eta, bundle)
    if alg == "GP-logbar":
        return log_barrier_gp_step(game, params, eta, lam, bundle)
    return log_barrier_npg_step(game, params, eta, lam, trunc, bundle)


# --- trajectories ---------------------------------------------------------------------


@dataclass
class TrajectoryRow:
    iter: int
    diag: object  # DiagnosticsRecord
    ascent: object | None  # AscentReport for the step that produced this iterate

    def to_dict(self):
        out = {"iter": self.iter, **self.diag.to_dict()}
        out["ascent"] = self.ascent.to_dict() if self.ascent is not None else None
        return out


@dataclass
class TrajectoryRecord:
    config: RunConfig
    eta: float
    n_agents: int
    rows: list = field(default_factory=list)
    final_params: PolicyParams | None = None
    steps_done: int = 0
    running_min_c: float = math.inf
    ascent_violations: int = 0
    min_z: float | None = None
    max_phi_drop: float = -math.inf  # largest Phi(t) - Phi(t+1) over all steps
    min_pi_per_agent: list = field(default_factory=list)  # over every iterate
    M_used: float | None = None

    CSV_FIXED = ("iter", "phi", "phi_reg", "grad_norm", "ne_gap_max")

    def header(self):
        gaps = [f"ne_gap_{i + 1}" for i in range(self.n_agents)]
        return list(self.CSV_FIXED) + gaps + ["c_theta", "m_theta", "min_pi"]

    def column(self, name):
        if name == "iter":
            return np.array([r.iter for r in self.rows])
        if name.startswith("ne_gap_") and name != "ne_gap_max":
            k = int(name.rsplit("_", 1)[1]) - 1
            return np.array([r.diag.ne_gap_per_agent[k] for r in self.rows])
        attr = {"min_pi": "min_policy_entry"}.get(name, name)
        return np.array([getattr(r.diag, attr) for r in self.rows])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.header()) + "\n")
        for r in self.rows:
            d = r.diag
            vals = [d.phi, d.phi_reg, d.grad_norm, d.ne_gap_max, *d.ne_gap_per_agent,
                    d.c_theta, d.m_theta, d.min_policy_entry]
            buf.write(str(r.iter) + "," + ",".join(format(float(v), ".17g") for v in vals) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as f:
                f.write(text)
        return text

    def summary(self, threshold: float = 1e-2) -> dict:
        gaps = self.column("ne_gap_max") if self.rows else np.array([])
        hit = next((r.iter for r, gp in zip(self.rows, gaps) if gp <= threshold), None)
        return {
            "algorithm": self.config.algorithm,
            "eta": self.eta,
            "lambda": self.config.lam,
            "steps": self.steps_done,
            "final_ne_gap": float(gaps[-1]) if len(gaps) else None,
            "threshold": threshold,
            "iterations_to_threshold": hit,
            "running_min_c": self.running_min_c,
            "ascent_violations": self.ascent_violations,
            "min_z": self.min_z,
        }


def initial_params(game: GameSpec, config: RunConfig, base_dir: str | None = None) -> PolicyParams:
    if config.init == "uniform":
        return uniform_params(game)
    if config.init == "random":
        return random_params(game, config.seed)
    path = config.init
    if base_dir is not None and not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    try:
        with open(path) as f:
            return load_policy(f.read(), game)
    except (OSError, ValueError, KeyError) as exc:
        raise InvalidConfigError(f"cannot load initial policy {config.init!r}: {exc}") from exc


def _finite_bundle(b: EvalBundle) -> bool:
    return bool(np.isfinite(b.V).all() and np.isfinite(b.d).all() and (b.Phi is None or math.isfinite(b.Phi)))


def run_trajectory(game: GameSpec, config: RunConfig, base_dir: str | None = None,
                   params: PolicyParams | None = None, tie_tol: float = TIE_TOL) -> TrajectoryRecord:
    """Run ``config.T`` steps and collect diagnostics.

    Rows are kept at t = 0, every ``record_every`` steps and at t = T.  The
    running minimum of c(theta), the ascent certificates and the per-agent
    probability minima are tracked at every step regardless of cadence.
    On a non-finite quantity raises :class:`NumericalBlowUp` whose ``record``
    holds everything gathered up to the last good iterate.
    """
    if not game.has_potential:
        raise MissingPotentialError("trajectories need a potential (or an identical-interest game)")
    eta = resolve_eta(game, config)
    lam = config.lam
    M = config.M if config.M is not None else m_bound(game)
    if params is None:
        params = initial_params(game, config, base_dir)
    params.check_shapes(game)
    rec = TrajectoryRecord(config, eta, game.n_agents, M_used=M)
    bundle = evaluate(game, params)

    def track(t, b, p, asc):
        c, _ = c_theta(game, None, tie_tol, b)
        rec.running_min_c = min(rec.running_min_c, c)
        mins = [float(x.min()) for x in b.table.pi]
        rec.min_pi_per_agent = mins if not rec.min_pi_per_agent else [min(a, b_) for a, b_ in zip(rec.min_pi_per_agent, mins)]
        if asc is not None:
            if not asc.holds:
                rec.ascent_violations += 1
            if asc.min_z is not None:
                rec.min_z = asc.min_z if rec.min_z is None else min(rec.min_z, asc.min_z)
        if t == 0 or t % config.record_every == 0 or t == config.T:
            rec.rows.append(TrajectoryRow(t, diagnose(game, b, p, lam, tie_tol), asc))

    track(0, bundle, params, None)
    rec.final_params = params
    for t in range(1, config.T + 1):
        try:
            new = step(game, params, config.algorithm, eta, lam, config.truncation, bundle)
            nb = evaluate(game, new)
            if not _finite_bundle(nb):
                raise NumericalBlowUp(None, "value functions became non-finite")
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                asc = ascent_from_bundles(game, bundle, nb, params, new, config.algorithm, eta, lam, M)
            if not (math.isfinite(asc.delta) and math.isfinite(asc.bound)):
                raise NumericalBlowUp(None, "potential ascent became non-finite")
            rec.max_phi_drop = max(rec.max_phi_drop, bundle.Phi - nb.Phi)
            track(t, nb, new, asc)
        except (NumericalBlowUp, FloatingPointError, ValueError) as exc:
            raise NumericalBlowUp(t, f"{config.algorithm} step failed: {exc}", rec) from exc
        params, bundle = new, nb
        rec.final_params = params
        rec.steps_done = t
    return rec
