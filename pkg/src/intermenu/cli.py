"""Command-line front end.

Subcommands: ``solve`` (one outcome as JSON), ``sweep`` (CSV over a bias
grid), ``verify`` (obedience report plus certificate JSON), ``closed-form``
(uniform-quadratic formulas), ``compare`` (three-regime JSON), ``oracle``
(raw LP best response). Configuration is accepted as flags or a JSON
config file, flags overriding file values. Exit codes: 0 success, 2 config
error, 3 solver error, 4 verification failure. Diagnostics go to standard
error; data goes to files or standard output.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .costs import CostFunction, PowerCost
from .distributions import (PoolSegment, PosteriorDistribution, Prior,
                            monotone_pool)
from .errors import (CertificateFailed, ConfigError, IntermenuError,
                     OutOfRegime, RegularityError)
from .formatting import dumps
from .menus import Menu
from .outcomes import compare_regimes, sweep, write_sweep_csv
from .persuasion import build_certificate, check_obedience, oracle_best_response
from .restricted import solve_restricted_menu
from .solver import solve_mussa_rosen, solve_optimal_menu

MAX_CLI_CAP = 8  # binding-pattern enumeration is 2^cap; desk scale only


def _build_prior(spec: str) -> Prior:
    try:
        if spec == "uniform":
            return Prior.uniform()
        if spec.startswith("power:"):
            return Prior.power(float(spec.split(":", 1)[1]))
        if spec.startswith("csv:"):
            return Prior.from_csv(spec.split(":", 1)[1])
        if spec.endswith(".csv"):
            return Prior.from_csv(spec)
    except (RegularityError, ValueError, OSError) as exc:
        raise ConfigError("prior", str(exc)) from exc
    raise ConfigError("prior", f"unknown prior spec {spec!r} "
                      "(use uniform | power:K | csv:PATH)")


def _build_cost(spec: str, qbar: float | None) -> CostFunction:
    try:
        if spec.startswith("power:"):
            k = float(spec.split(":", 1)[1])
            return PowerCost(k) if qbar is None else PowerCost(k, qbar)
    except ValueError as exc:
        raise ConfigError("cost", str(exc)) from exc
    raise ConfigError("cost", f"unknown cost spec {spec!r} (use power:K)")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("config", str(exc)) from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config", "config file must hold a JSON object")
    return cfg


def _merged(args: argparse.Namespace, key: str, default=None):
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    return getattr(args, "_config", {}).get(key, default)


def _require_bias(args: argparse.Namespace) -> float:
    b = _merged(args, "b")
    if b is None:
        raise ConfigError("b", "bias is required")
    b = float(b)
    if b <= 0.0:
        raise ConfigError("b", "bias must be positive (the zero-bias "
                          "benchmark is `solve --regime mussa-rosen`)")
    return b


def _emit(args: argparse.Namespace, text: str) -> None:
    out = _merged(args, "out")
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _read_menu_arg(raw: str) -> tuple[Menu, list[float] | None]:
    """Accept inline JSON, @file, or - (stdin); either a list of items
    [{"q":..,"t":..}] or a full solve output carrying items and cutoffs."""
    if raw == "-":
        raw = sys.stdin.read()
    elif raw.startswith("@"):
        try:
            with open(raw[1:]) as fh:
                raw = fh.read()
        except OSError as exc:
            raise ConfigError("menu", str(exc)) from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError("menu", f"invalid JSON: {exc}") from exc
    cutoffs = None
    if isinstance(data, dict):
        cutoffs = data.get("cutoffs")
        data = data.get("items")
    if not isinstance(data, list) or not data:
        raise ConfigError("menu", "expected a non-empty list of items")
    try:
        menu = Menu.from_pairs((item["q"], item["t"]) for item in data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("menu", f"invalid menu: {exc}") from exc
    return menu, cutoffs


def _zero_rent_cutoffs(prior: Prior, menu: Menu) -> list[float]:
    """The seller-intended pooling cutoffs for a bare menu: working from the
    top, each cutoff makes its interval's conditional mean hit the item's
    breakpoint exactly (no rent at the margin)."""
    cutoffs: list[float] = []
    upper = 1.0
    for target in reversed(menu.breakpoints):
        if prior.conditional_mean(0.0, upper) >= target:
            break  # lowest items pool from the bottom of the support
        a, b = 0.0, upper
        for _ in range(200):
            mid = 0.5 * (a + b)
            if prior.conditional_mean(mid, upper) < target:
                a = mid
            else:
                b = mid
        cutoffs.append(0.5 * (a + b))
        upper = cutoffs[-1]
    cutoffs.reverse()
    return cutoffs


def _posterior_dict(posterior: PosteriorDistribution) -> list[dict]:
    out = []
    for seg in posterior.segments:
        if isinstance(seg, PoolSegment):
            out.append({"kind": "pool", "lo": seg.lo, "hi": seg.hi,
                        "atom": seg.atom, "mass": seg.mass})
        else:
            out.append({"kind": type(seg).__name__, "lo": seg.lo, "hi": seg.hi})
    return out


def cmd_solve(args: argparse.Namespace) -> int:
    prior = _build_prior(_merged(args, "prior", "uniform"))
    cost = _build_cost(_merged(args, "cost", "power:2"), _merged(args, "qbar"))
    if _merged(args, "regime", "auto") == "mussa-rosen":
        sol = solve_mussa_rosen(prior, cost)
        table = [{"w": w, "q": sol.allocation(w), "t": sol.transfer(w)}
                 for w in np.linspace(0.0, 1.0, 101)]
        _emit(args, dumps({
            "regime": "mussa_rosen",
            "exclusion_cutoff": sol.exclusion_cutoff,
            "profit": sol.profit,
            "consumer_rent": sol.consumer_rent,
            "total_surplus": sol.total_surplus,
            "distortion": sol.distortion,
            "avg_quality": sol.avg_quality,
            "trade_probability": sol.trade_probability,
            "allocation_table": table,
        }))
        return 0
    bias = _require_bias(args)
    cap = _merged(args, "cap")
    if cap is not None:
        cap = _check_cap(cap)
        outcome = solve_restricted_menu(prior, cost, bias, cap)
    else:
        outcome = solve_optimal_menu(prior, cost, bias)
    _emit(args, dumps(outcome.to_dict()))
    return 0


def _check_cap(cap) -> int:
    cap = int(cap)
    if not 1 <= cap <= MAX_CLI_CAP:
        raise ConfigError("cap", f"cap must be in 1..{MAX_CLI_CAP}")
    return cap


def _parse_grid(args: argparse.Namespace) -> list[float]:
    spec = _merged(args, "b-grid")
    blist = _merged(args, "b-list")
    if spec is None and blist is None:
        raise ConfigError("b-grid", "provide --b-grid START:STOP:N or --b-list")
    if spec is not None:
        try:
            start, stop, n = spec.split(":")
            grid = np.linspace(float(start), float(stop), int(n))
        except ValueError as exc:
            raise ConfigError("b-grid", f"expected START:STOP:N, got {spec!r}") from exc
        return [float(b) for b in grid]
    try:
        return [float(tok) for tok in str(blist).split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError("b-list", "expected comma-separated floats") from exc


def cmd_sweep(args: argparse.Namespace) -> int:
    prior = _build_prior(_merged(args, "prior", "uniform"))
    cost = _build_cost(_merged(args, "cost", "power:2"), _merged(args, "qbar"))
    grid = _parse_grid(args)
    if any(b <= 0 for b in grid):
        raise ConfigError("b-grid", "all bias values must be positive")
    cap = _merged(args, "cap")
    if cap is not None:
        cap = _check_cap(cap)
    jobs = int(_merged(args, "jobs", 1))
    rows = sweep(prior, cost, grid, cap=cap, jobs=jobs)
    failures = [r for r in rows if r.error is not None]
    for row in failures:
        print(f"b={row.b:.6g}: {row.error}", file=sys.stderr)
    out = _merged(args, "out")
    if out is None:
        write_sweep_csv(rows, sys.stdout)
    else:
        write_sweep_csv(rows, out)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    prior = _build_prior(_merged(args, "prior", "uniform"))
    bias = _require_bias(args)
    menu, cutoffs = _read_menu_arg(_merged(args, "menu") or
                                   (_ for _ in ()).throw(
                                       ConfigError("menu", "menu is required")))
    if _merged(args, "cutoffs") is not None:
        cutoffs = json.loads(_merged(args, "cutoffs"))
    if cutoffs is None:
        cutoffs = _zero_rent_cutoffs(prior, menu)
    interior = [float(c) for c in cutoffs if c > 1e-12]
    posterior = monotone_pool(prior, interior)
    grid_m = int(_merged(args, "grid-m", 201))
    tol = _merged(args, "tol")
    report = check_obedience(menu, bias, prior, posterior,
                             tol=None if tol is None else float(tol),
                             grid_m=grid_m)
    cert_dict, cert_error = None, None
    try:
        cert_dict = build_certificate(menu, bias, prior, posterior).to_dict()
    except CertificateFailed as exc:
        cert_error = str(exc)
    payload = report.to_dict()
    payload["cutoffs"] = interior
    payload["certificate"] = cert_dict
    payload["certificate_error"] = cert_error
    _emit(args, dumps(payload))
    if not report.obedient:
        print(f"obedience gap {report.gap:.6g} exceeds tolerance "
              f"{report.tol:.6g}", file=sys.stderr)
        return 4
    return 0


def cmd_closed_form(args: argparse.Namespace) -> int:
    from . import uniform_quadratic as uq
    bias = _require_bias(args)
    cap = _merged(args, "cap")
    try:
        if cap is not None:
            menu = uq.uq_restricted_menu(bias, int(cap))
            _emit(args, dumps({"b": bias, "cap": int(cap),
                               "items": menu.to_dicts(),
                               "breakpoints": list(menu.breakpoints)}))
        else:
            outcome = uq.uq_unrestricted_menu(bias)
            _emit(args, dumps(outcome.to_dict()))
    except OutOfRegime as exc:
        raise ConfigError("b", str(exc)) from exc
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    prior = _build_prior(_merged(args, "prior", "uniform"))
    cost = _build_cost(_merged(args, "cost", "power:2"), _merged(args, "qbar"))
    bias = _require_bias(args)
    _emit(args, dumps(compare_regimes(prior, cost, bias).to_dict()))
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    prior = _build_prior(_merged(args, "prior", "uniform"))
    bias = _require_bias(args)
    menu, _ = _read_menu_arg(_merged(args, "menu") or
                             (_ for _ in ()).throw(
                                 ConfigError("menu", "menu is required")))
    grid_m = int(_merged(args, "grid-m", 201))
    best = oracle_best_response(menu, bias, prior, grid_m)
    _emit(args, dumps({
        "oracle_value": best.value,
        "grid_m": best.grid_m,
        "action_masses": list(best.action_masses),
        "action_means": list(best.action_means),
        "posterior": _posterior_dict(best.posterior),
    }))
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--prior", help="uniform | power:K | csv:PATH")
    p.add_argument("--cost", help="power:K (default power:2)")
    p.add_argument("--qbar", type=float, help="quality ceiling")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--out", help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intermenu",
        description="Optimal screening menus under a biased information "
                    "intermediary")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance, JSON output")
    _add_common(p)
    p.add_argument("--b", type=float, help="intermediary bias")
    p.add_argument("--cap", type=int, help="restrict the item count")
    p.add_argument("--regime", choices=["auto", "mussa-rosen"])
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="comparative statics over a bias grid, CSV")
    _add_common(p)
    p.add_argument("--b-grid", help="START:STOP:N inclusive grid")
    p.add_argument("--b-list", help="comma-separated bias values")
    p.add_argument("--cap", type=int)
    p.add_argument("--jobs", type=int, help="parallel rows (default 1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="obedience check for a menu")
    _add_common(p)
    p.add_argument("--b", type=float)
    p.add_argument("--menu", help="JSON items, @file, or - for stdin")
    p.add_argument("--cutoffs", help="JSON list of pooling cutoffs")
    p.add_argument("--grid-m", type=int)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("closed-form", help="uniform-quadratic closed forms")
    _add_common(p)
    p.add_argument("--b", type=float)
    p.add_argument("--cap", type=int)
    p.set_defaults(func=cmd_closed_form)

    p = sub.add_parser("compare", help="three-regime comparison, JSON")
    _add_common(p)
    p.add_argument("--b", type=float)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="raw LP best response for a menu")
    _add_common(p)
    p.add_argument("--b", type=float)
    p.add_argument("--menu", help="JSON items, @file, or - for stdin")
    p.add_argument("--grid-m", type=int)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._config = _load_config(getattr(args, "config", None))
        return args.func(args)
    except ConfigError as exc:
        print(f"config error - {exc}", file=sys.stderr)
        return 2
    except IntermenuError as exc:
        print(f"solver error - {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
