"""Command-line entry point: ``mpgplay <command> ...``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import kernels
from .diagnostics import brute_force_pure_ne, validate_potential_property
from .dynamics import RunConfig, run_trajectory, theory_stepsizes
from .errors import (
    GameParseError,
    GameValidationError,
    InvalidConfigError,
    MissingPotentialError,
    NumericalBlowUp,
    SearchSpaceTooLarge,
)
from .game import BUILTIN_GAMES, parse_game, resolve_game, validate_game
from .policy import dump_policy

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BLOWUP = 0, 1, 2, 3

FIGURE1_ETA = 5.0
FIGURE1_LAMBDA = 0.003
FIGURE1_T = 2000
FIGURE1_T_GP = 20000
SWEEP_RECORD_EVERY = 10


def _err(msg):
    print(f"mpgplay: {msg}", file=sys.stderr)


def _dump(obj):
    print(json.dumps(obj, indent=2, default=_jsonable))


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if hasattr(x, "tolist"):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x).__name__}")


def _load_game_unvalidated(ref):
    key = ref.removeprefix("builtin:")
    if key in BUILTIN_GAMES:
        return BUILTIN_GAMES[key]()
    with open(ref) as f:
        return parse_game(f.read())


def _game_ref(ref, base_dir):
    if ref.removeprefix("builtin:") in BUILTIN_GAMES or os.path.isabs(ref) or base_dir is None:
        return ref
    return os.path.join(base_dir, ref)


# --- commands -------------------------------------------------------------------------


def cmd_validate(args):
    try:
        game = _load_game_unvalidated(args.game)
    except (OSError, GameParseError, GameValidationError) as exc:
        _err(f"cannot read game: {exc}")
        return EXIT_INPUT
    report = validate_game(game)
    out = {"game": args.game, "identical_interest": game.identical_interest, **report.to_dict()}
    ok = report.ok
    if game.has_potential and ok:
        pot = validate_potential_property(game, samples=args.samples, seed=args.seed)
        out["potential_property"] = pot.to_dict()
        ok = ok and pot.ok
    else:
        out["potential_property"] = None
    out["ok"] = ok
    _dump(out)
    if not ok:
        for c in report.failures():
            _err(f"check failed: {c.name}: {c.detail}")
        if out["potential_property"] and not out["potential_property"]["ok"]:
            _err(f"potential-property violation {out['potential_property']['max_violation']:.3g}"
                 f" at {out['potential_property']['worst']}")
    return EXIT_OK if ok else EXIT_FAIL


def _policy_path(csv_path):
    stem, _ = os.path.splitext(csv_path)
    return stem + "_policy.json"


def _execute(game_ref, config, csv_path, base_dir=None):
    """Run one trajectory and write its CSV and final policy; returns a summary dict."""
    game = resolve_game(game_ref)
    try:
        rec = run_trajectory(game, config, base_dir=base_dir)
    except NumericalBlowUp as exc:
        if exc.record is not None:
            exc.record.to_csv(csv_path)
            if exc.record.final_params is not None:
                with open(_policy_path(csv_path), "w") as f:
                    f.write(dump_policy(exc.record.final_params))
        summary = exc.record.summary() if exc.record is not None else {}
        summary.update(status="failed", error=str(exc), iteration=exc.iteration, csv=csv_path)
        return summary
    rec.to_csv(csv_path)
    with open(_policy_path(csv_path), "w") as f:
        f.write(dump_policy(rec.final_params))
    summary = rec.summary()
    summary.update(status="ok", csv=csv_path)
    return summary


def cmd_run(args):
    try:
        with open(args.config) as f:
            doc = json.load(f)
        if "game" not in doc:
            raise InvalidConfigError("config needs a 'game' (path or built-in id)")
        config = RunConfig.from_dict(doc)
    except (OSError, json.JSONDecodeError, InvalidConfigError) as exc:
        _err(f"bad config: {exc}")
        return EXIT_INPUT
    base_dir = os.path.dirname(os.path.abspath(args.config))
    out = args.out or os.path.splitext(args.config)[0] + ".csv"
    try:
        summary = _execute(_game_ref(config.game, base_dir), config, out, base_dir)
    except (OSError, GameParseError, GameValidationError, InvalidConfigError, MissingPotentialError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    _dump(summary)
    if summary["status"] != "ok":
        _err(summary["error"])
        return EXIT_BLOWUP
    return EXIT_OK


def figure1_configs():
    return {
        "GP": RunConfig("GP", eta=FIGURE1_ETA, T=FIGURE1_T_GP),
        "NPG": RunConfig("NPG", eta=FIGURE1_ETA, T=FIGURE1_T),
        "GP-logbar": RunConfig("GP-logbar", eta=FIGURE1_ETA, lam=FIGURE1_LAMBDA, T=FIGURE1_T),
        "NPG-logbar": RunConfig("NPG-logbar", eta=FIGURE1_ETA, lam=FIGURE1_LAMBDA, T=FIGURE1_T, truncation=1.0),
    }


def cmd_figure1(args):
    os.makedirs(args.out, exist_ok=True)
    results = []
    for name, config in figure1_configs().items():
        path = os.path.join(args.out, f"figure1_{name}.csv")
        results.append({"name": name, **_execute("figure1", config, path)})
    with open(os.path.join(args.out, "summary.json"), "w") as f:
        json.dump(results, f, indent=2, default=_jsonable)
    _dump(results)
    return EXIT_OK if all(r["status"] == "ok" for r in results) else EXIT_BLOWUP


def cmd_brute_ne(args):
    try:
        game = resolve_game(args.game)
        found = brute_force_pure_ne(game, limit=args.limit)
    except (OSError, GameParseError, GameValidationError) as exc:
        _err(f"cannot read game: {exc}")
        return EXIT_INPUT
    except SearchSpaceTooLarge as exc:
        _err(str(exc))
        return EXIT_FAIL
    print(f"{len(found)} pure Nash equilibri{'um' if len(found) == 1 else 'a'}")
    for ne in found:
        d = ne.to_dict(game)
        parts = []
        for i, labels in enumerate(d["action_labels"]):
            per_state = ", ".join(f"{game.states[s]}:{a}" for s, a in enumerate(labels))
            parts.append(f"agent {i + 1} -> {per_state}")
        print("  " + "; ".join(parts) + "  values " + ", ".join(f"{v:.10g}" for v in d["values"]))
    _dump({"count": len(found), "equilibria": [ne.to_dict(game) for ne in found]})
    return EXIT_OK


def cmd_stepsizes(args):
    try:
        game = resolve_game(args.game)
        rep = theory_stepsizes(game, args.lam, args.M)
    except (OSError, GameParseError, GameValidationError, MissingPotentialError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    out = rep.to_dict()
    if out["eta_npg"] is None:
        out["eta_npg"] = "unconstrained"
    _dump(out)
    return EXIT_OK


# --- sweeps ---------------------------------------------------------------------------


def load_suite(path):
    """Parse a suite file into a flat list of ``(run_name, game_ref, RunConfig, csv_path)``.

    Layout: ``{"name": str, "entries": [{"name", "game", "configs": [...], "output"?}]}``.
    """
    with open(path) as f:
        doc = json.load(f)
    base_dir = os.path.dirname(os.path.abspath(path))
    jobs, seen = [], set()
    for e_idx, entry in enumerate(doc.get("entries", [])):
        ename = entry.get("name", f"entry{e_idx}")
        if "game" not in entry:
            raise InvalidConfigError(f"suite entry {ename!r} needs a 'game'")
        game_ref = _game_ref(entry["game"], base_dir)
        out_dir = entry.get("output", ename)
        for k, cdoc in enumerate(entry.get("configs", [])):
            cdoc = dict(cdoc)
            cdoc.setdefault("record_every", SWEEP_RECORD_EVERY)
            cdoc.pop("game", None)
            label = cdoc.pop("name", None)
            config = RunConfig.from_dict(cdoc)
            name = f"{ename}_{label}" if label else f"{ename}_{k:03d}_{config.algorithm}"
            rel = os.path.join(out_dir, name + ".csv")
            if rel in seen:
                raise InvalidConfigError(f"duplicate output path {rel}")
            seen.add(rel)
            jobs.append((name, game_ref, config, rel))
    return doc.get("name", os.path.splitext(os.path.basename(path))[0]), jobs, base_dir


def _sweep_job(job):
    name, game_ref, config, csv_path, base_dir = job
    try:
        summary = _execute(game_ref, config, csv_path, base_dir)
    except Exception as exc:  # one bad run must not sink the sweep
        summary = {"status": "failed", "error": f"{type(exc).__name__}: {exc}", "csv": csv_path}
    summary["name"] = name
    return summary


def cmd_sweep(args):
    try:
        suite_name, jobs, base_dir = load_suite(args.suite)
    except (OSError, json.JSONDecodeError, InvalidConfigError) as exc:
        _err(f"bad suite: {exc}")
        return EXIT_INPUT
    out_dir = args.out or os.path.join(base_dir, f"{suite_name}_out")
    work = []
    for name, game_ref, config, rel in jobs:
        csv_path = os.path.join(out_dir, rel)
        os.makedirs(os.path.dirname(csv_path), exist_ok=True)
        work.append((name, game_ref, config, csv_path, base_dir))
    os.makedirs(out_dir, exist_ok=True)
    if args.parallel > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(_sweep_job, work))
    else:
        results = [_sweep_job(w) for w in work]
    for r in results:
        r["csv"] = os.path.relpath(r["csv"], out_dir)
    summary = {"suite": suite_name, "runs": results, "failed": sum(r["status"] != "ok" for r in results)}
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2, default=_jsonable)
    _dump(summary)
    return EXIT_OK if summary["failed"] == 0 else EXIT_FAIL


# --- parser ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="mpgplay", description=__doc__)
    p.add_argument("--backend", choices=["auto", "cython", "python"], default="auto",
                   help="kernel implementation (default: compiled when available)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a game file and its potential property")
    s.add_argument("game")
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("run", help="run one trajectory from a JSON config")
    s.add_argument("config")
    s.add_argument("--out", help="CSV path (default: next to the config)")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("figure1", help="the four schemes on the built-in matrix game")
    s.add_argument("--out", default="figure1_out")
    s.set_defaults(func=cmd_figure1)

    s = sub.add_parser("brute-ne", help="enumerate pure Nash equilibria")
    s.add_argument("game")
    s.add_argument("--limit", type=int, default=10**6)
    s.set_defaults(func=cmd_brute_ne)

    s = sub.add_parser("sweep", help="run a suite of configs")
    s.add_argument("suite")
    s.add_argument("--parallel", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("stepsizes", help="theory stepsizes and smoothness constants")
    s.add_argument("game")
    s.add_argument("--lambda", dest="lam", type=float, default=0.0)
    s.add_argument("--M", type=float, default=None, help="override M (default: max_s 1/((1-gamma) rho(s)))")
    s.set_defaults(func=cmd_stepsizes)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.backend != "auto":
        try:
            kernels.set_backend(args.backend)
        except RuntimeError as exc:
            _err(str(exc))
            return EXIT_INPUT
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
