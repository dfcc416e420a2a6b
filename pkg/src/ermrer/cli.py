"""Command-line front end.

Subcommands
-----------
figure-example1  cumulant curves of the two-atom example, one CSV per q
solve            Gibbs posterior and optimality report for a config
sweep            cumulant (or concentration) table over a lambda grid
gen-error        generalization error report for a dataset prior
verify           randomized identity battery with a pass/fail exit code

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 fatal infeasibility.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .errors import DomainError, ErmrerError, InfeasibleError, InvalidArgumentError
from .generalization import DatasetPrior, expected_sensitivity, generalization_error
from .gibbs import sample, solve_ermrer
from .measure_space import ModelSpace, ReferenceMeasure, probability_measure
from .optimality import analyze, concentration_profile, solve_delta_epsilon
from .partition import cumulant_sweep_csv, cumulants
from .risk_model import LOSSES, PREDICTORS, Dataset, EmpiricalRisk, LossSpec, empirical_risk
from .verify import CHECKS, FAULTS, format_table, run_battery

log = logging.getLogger("ermrer")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3

DEFAULT_Q = (0.75, 0.5, 0.25)
DEFAULT_GRID = "0.01:10:200"


class ConfigError(Exception):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``a:b:steps`` to ``steps`` log-spaced points from a to b."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ConfigError(f"lambda grid must look like a:b:steps, got {text!r}")
    if a <= 0 or b <= 0 or n < 1:
        raise ConfigError("lambda grid endpoints must be positive and steps >= 1")
    return np.logspace(math.log10(a), math.log10(b), n)


def _fmt(x: float) -> str:
    return "%.17g" % x


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")


def _relative(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


def _risk_from_dataset(spec: dict, path: Path) -> EmpiricalRisk:
    try:
        space = ModelSpace.from_coords(spec["coords"])
        loss = LossSpec(PREDICTORS[spec.get("predictor", "linear")],
                        LOSSES[spec.get("loss", "squared")])
    except KeyError as exc:
        raise ConfigError(f"dataset risk needs coords, a known predictor and loss: {exc}")
    return empirical_risk(space, Dataset.from_csv(path), loss)


def build_risk(cfg: dict, base: Path) -> EmpiricalRisk:
    spec = cfg.get("risk")
    if not isinstance(spec, dict):
        raise ConfigError("config needs a 'risk' section")
    sources = [k for k in ("values", "dataset") if k in spec]
    if len(sources) != 1:
        raise ConfigError("risk needs exactly one of 'values' or 'dataset'")
    if "values" in spec:
        return EmpiricalRisk([math.inf if v is None else float(v) for v in spec["values"]])
    return _risk_from_dataset(spec, _relative(base, spec["dataset"]))


def build_measure(cfg: dict) -> ReferenceMeasure:
    spec = cfg.get("measure")
    if not isinstance(spec, dict):
        raise ConfigError("config needs a 'measure' section")
    return ReferenceMeasure.from_dict(spec)


def build_prior(cfg: dict, base: Path) -> DatasetPrior:
    spec = cfg.get("prior")
    if not isinstance(spec, dict):
        raise ConfigError("config needs a 'prior' section")
    if "risks" in spec:
        risks = tuple(EmpiricalRisk(r) for r in spec["risks"])
    elif "datasets" in spec:
        risks = tuple(_risk_from_dataset(spec, _relative(base, d)) for d in spec["datasets"])
    else:
        raise ConfigError("prior needs 'risks' or 'datasets'")
    return DatasetPrior(risks, spec.get("probs", np.full(len(risks), 1.0 / len(risks))))


def example1_config(q: float = 0.5) -> dict:
    return {"measure": {"kind": "probability", "weights": [q, 1.0 - q]},
            "risk": {"values": [0.0, 1.0]}, "lambda": 1.0}


def _resolve_lambda(args, cfg) -> float:
    if args.lam is not None:
        return args.lam
    if "lambda" in cfg:
        return float(cfg["lambda"])
    raise ConfigError("no regularization factor: pass --lambda or set 'lambda'")


def _resolve_grid(args, cfg) -> np.ndarray:
    if args.lambda_grid is not None:
        return parse_grid(args.lambda_grid)
    g = cfg.get("lambda_grid")
    if g is None:
        raise ConfigError("no lambda grid: pass --lambda-grid or set 'lambda_grid'")
    grid = parse_grid(g) if isinstance(g, str) else np.asarray(g, dtype=float)
    if np.any(grid <= 0):
        raise ConfigError("lambda grid must be strictly positive")
    return grid


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _config_and_base(args):
    if args.config is None:
        return None, Path.cwd()
    return load_config(args.config), Path(args.config).resolve().parent


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def example1_csv(q: float, grid) -> str:
    Q = probability_measure([q, 1.0 - q])
    L = [0.0, 1.0]
    lines = ["lambda,k1,k2,k3"]
    for lam in grid:
        c = cumulants(Q, L, float(lam))
        lines.append(",".join(_fmt(v) for v in (c.lam, c.k1, c.k2, c.k3)))
    return "\n".join(lines) + "\n"


def cmd_figure_example1(args) -> int:
    qs = DEFAULT_Q if args.q is None else tuple(float(v) for v in args.q.split(","))
    if any(not 0.0 < q < 1.0 for q in qs):
        raise ConfigError("every q must lie in (0, 1)")
    grid = parse_grid(args.lambda_grid or DEFAULT_GRID)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    for q in qs:
        path = out / f"example1_q{q:g}.csv"
        path.write_text(example1_csv(q, grid))
        log.info("wrote %s", path)
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg, base = _config_and_base(args)
    if cfg is None:
        cfg = example1_config()
    Q = build_measure(cfg)
    L = build_risk(cfg, base)
    lam = _resolve_lambda(args, cfg)
    post = solve_ermrer(Q, L, lam)
    doc = {"posterior": post.to_dict(), "optimality": analyze(Q, L).to_dict()}
    if args.samples:
        doc["samples"] = sample(post, args.seed, args.samples)
    if "delta" in cfg and "epsilon" in cfg:
        res = solve_delta_epsilon(Q, L, float(cfg["delta"]), float(cfg["epsilon"]))
        doc["delta_epsilon"] = res._asdict()
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, base = _config_and_base(args)
    if cfg is None:
        cfg = example1_config()
    Q = build_measure(cfg)
    L = build_risk(cfg, base)
    grid = _resolve_grid(args, cfg)
    if args.profile:
        text = concentration_profile(Q, L, np.sort(grid)[::-1]).to_csv()
    else:
        text = cumulant_sweep_csv(cumulants(Q, L, float(lam)) for lam in grid)
    _emit(text, args.out)
    return EXIT_OK


def cmd_gen_error(args) -> int:
    cfg, base = _config_and_base(args)
    if cfg is None:
        raise ConfigError("gen-error needs --config with a 'prior' section")
    Q = build_measure(cfg)
    prior = build_prior(cfg, base)
    lam = _resolve_lambda(args, cfg)
    rep = generalization_error(Q, lam, prior)
    doc = rep.to_dict()
    doc["expected_sensitivity"] = expected_sensitivity(Q, lam, prior)
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    only = None
    if args.only is not None:
        only = [s for s in args.only.split(",") if s]
        unknown = set(only) - {name for name, _, _ in CHECKS}
        if unknown:
            raise ConfigError(f"unknown checks: {', '.join(sorted(unknown))}")
        if not only:
            log.warning("empty check selection; nothing to verify")
            print("no checks selected")
            return EXIT_OK
    results = run_battery(args.seed, only=only, fault=args.inject_fault)
    print(format_table(results))
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ermrer", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, lam=False, grid=False):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--out", help="output path (stdout if omitted)")
        sp.add_argument("--seed", type=int, default=0)
        if lam:
            sp.add_argument("--lambda", dest="lam", type=float)
        if grid:
            sp.add_argument("--lambda-grid", help="a:b:steps, log-spaced")

    f = sub.add_parser("figure-example1", help="two-atom cumulant curves")
    common(f, grid=True)
    f.add_argument("--q", help="comma separated weights of the zero-risk atom")
    f.set_defaults(func=cmd_figure_example1)

    s = sub.add_parser("solve", help="Gibbs posterior for a config")
    common(s, lam=True)
    s.add_argument("--samples", type=int, default=0, help="posterior draws to include")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="cumulants over a lambda grid")
    common(w, grid=True)
    w.add_argument("--profile", action="store_true", help="emit the concentration profile")
    w.set_defaults(func=cmd_sweep)

    g = sub.add_parser("gen-error", help="generalization error report")
    common(g, lam=True)
    g.set_defaults(func=cmd_gen_error)

    v = sub.add_parser("verify", help="run the identity battery")
    common(v)
    v.add_argument("--only", help="comma separated check names (empty selects none)")
    v.add_argument("--inject-fault", choices=FAULTS, help="corrupt one check on purpose")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidArgumentError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, InfeasibleError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ErmrerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
