"""Command-line interface: seeded runs producing CSV tables plus manifests.

Subcommands
-----------
trial    one Monte Carlo trial, one CSV row of estimates
sweep    parameter sweep (k, rho or length_km) with per-algorithm columns
theory   closed-form evaluation only, no simulation
decoy    decoy-state rate dataset over a transmission-rate grid
compare  sweep plus z-score columns against the closed forms

Every run resolves its settings as defaults < config file < command-line
flags, writes ``<out>.csv`` and ``<out>.manifest.json`` (the manifest records
the fully resolved configuration and seed), and exits nonzero on any
validation or domain error.  ``--seed`` is required wherever simulation is
involved unless ``--seed-from-entropy`` is given.
"""

from __future__ import annotations

import argparse
import math
import secrets
import sys
from dataclasses import replace
from typing import Any

import numpy as np
import yaml

from . import __version__, analytic
from .core import (AnalyticValidityError, Basis, ParameterError, PulseState,
                   SystemParams)
from .harness import (ALGORITHMS, SweepSpec, TrialConfig, add_z_scores,
                      emit_results, run_trial, sweep_rows, theory_columns)
from .parties import EveStrategy, FixedStateResend, InterceptResend, Passive

_EVE_STRATEGIES = ("passive", "fixed_resend", "intercept_resend")


def _as_float(value: Any, name: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParameterError(f"{name}={value!r} is not a number") from None


def _as_int(value: Any, name: str) -> int:
    f = _as_float(value, name)
    if f != int(f):
        raise ParameterError(f"{name}={value!r} is not an integer")
    return int(f)


def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ParameterError(f"cannot parse config {path}: {exc}") from exc
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ParameterError(f"config {path} must be a mapping at top level")
    return cfg


def _section(cfg: dict[str, Any], name: str) -> dict[str, Any]:
    sec = cfg.get(name) or {}
    if not isinstance(sec, dict):
        raise ParameterError(f"config section {name!r} must be a mapping")
    return dict(sec)


def _override(section: dict[str, Any], args: argparse.Namespace,
              mapping: dict[str, str]) -> dict[str, Any]:
    for flag, key in mapping.items():
        value = getattr(args, flag, None)
        if value is not None:
            section[key] = value
    return section


def _system_params(cfg: dict[str, Any], args: argparse.Namespace) -> SystemParams:
    sec = _override(_section(cfg, "params"), args, {
        "tau": "tau", "rho": "rho", "alpha": "alpha", "length_km": "length_km",
        "t_bob": "t_bob", "eta_d": "eta_d", "loss_db": "channel_loss_db",
    })
    if getattr(args, "k", None) is not None:
        if "tau" not in sec:
            raise ParameterError("--k needs tau (from config or --tau)")
        sec["rho"] = _as_float(args.k, "k") / _as_float(sec["tau"], "tau")
    missing = [key for key in ("tau", "rho") if key not in sec]
    if missing:
        raise ParameterError(f"missing required parameter(s): {', '.join(missing)}")
    kwargs = {key: _as_float(val, key) for key, val in sec.items()}
    return SystemParams(**kwargs)


def _eve_strategy(cfg: dict[str, Any], args: argparse.Namespace) -> EveStrategy:
    sec = _override(_section(cfg, "eve"), args,
                    {"strategy": "strategy", "fraction": "fraction"})
    strategy = sec.get("strategy", "passive")
    if strategy == "passive":
        return Passive()
    if strategy == "fixed_resend":
        state = PulseState(Basis(_as_int(sec.get("basis", 1), "eve.basis")),
                           _as_int(sec.get("bit", 0), "eve.bit"))
        return FixedStateResend(state=state,
                                fraction=_as_float(sec.get("fraction", 1.0),
                                                   "eve.fraction"))
    if strategy == "intercept_resend":
        return InterceptResend(fraction=_as_float(sec.get("fraction", 1.0),
                                                  "eve.fraction"))
    raise ParameterError(
        f"eve.strategy={strategy!r} must be one of {_EVE_STRATEGIES}")


def _resolve_seed(args: argparse.Namespace) -> int:
    if getattr(args, "seed", None) is not None:
        return _as_int(args.seed, "seed")
    if getattr(args, "seed_from_entropy", False):
        return secrets.randbits(63)
    raise ParameterError("--seed is required (or pass --seed-from-entropy)")


def _trial_config(cfg: dict[str, Any], args: argparse.Namespace,
                  seed: int) -> TrialConfig:
    sec = _override(_section(cfg, "trial"), args, {
        "algorithm": "algorithm", "n_slots": "n_slots", "burn_in": "burn_in",
    })
    burn_in = sec.get("burn_in")
    return TrialConfig(
        params=_system_params(cfg, args),
        seed=seed,
        eve=_eve_strategy(cfg, args),
        algorithm=str(sec.get("algorithm", "rogers")),
        n_slots=_as_int(sec.get("n_slots", 1_000_000), "n_slots"),
        burn_in=None if burn_in is None else _as_int(burn_in, "burn_in"),
    )


def _grid(sec: dict[str, Any]) -> tuple[float, ...]:
    grid = sec.get("grid")
    if grid is None:
        raise ParameterError("sweep needs a grid (config sweep.grid or --grid)")
    if isinstance(grid, str):
        grid = [g for g in grid.split(",") if g.strip()]
    return tuple(_as_float(g, "grid value") for g in grid)


def _sweep_spec(cfg: dict[str, Any], args: argparse.Namespace,
                seed: int) -> SweepSpec:
    sec = _override(_section(cfg, "sweep"), args, {
        "variable": "variable", "grid": "grid", "algorithms": "algorithms",
        "trials_per_point": "trials_per_point",
    })
    algorithms = sec.get("algorithms")
    if isinstance(algorithms, str):
        algorithms = tuple(a.strip() for a in algorithms.split(",") if a.strip())
    elif algorithms is not None:
        algorithms = tuple(str(a) for a in algorithms)
    return SweepSpec(
        variable=str(sec.get("variable", "k")),
        grid=_grid(sec),
        base=_trial_config(cfg, args, seed),
        algorithms=algorithms,
        trials_per_point=_as_int(sec.get("trials_per_point", 1),
                                 "trials_per_point"),
    )


def _decoy_params(cfg: dict[str, Any], args: argparse.Namespace,
                  params: SystemParams) -> analytic.DecoyParams:
    sec = _override(_section(cfg, "decoy"), args, {
        "mu": "mu", "y0": "y0", "e_det": "e_det", "e0": "e0",
        "f_ec": "f", "q_protocol": "q",
    })
    return analytic.DecoyParams(
        system=params,
        mu=_as_float(sec.get("mu", 0.48), "decoy.mu"),
        y0=_as_float(sec.get("y0", 1.7e-6), "decoy.y0"),
        e_det=_as_float(sec.get("e_det", 0.033), "decoy.e_det"),
        e0=_as_float(sec.get("e0", 0.5), "decoy.e0"),
        f=_as_float(sec.get("f", 1.22), "decoy.f"),
        q_protocol=_as_float(sec.get("q", 0.5), "decoy.q"),
    )


def _decoy_grid(cfg: dict[str, Any], args: argparse.Namespace) -> list[float]:
    sec = _section(cfg, "decoy")
    grid = sec.get("rho_grid")
    if getattr(args, "grid", None) is not None:
        return [float(g) for g in str(args.grid).split(",") if g.strip()]
    if grid is None:
        return list(np.logspace(4, 12, 33))
    if isinstance(grid, dict):
        start = _as_float(grid.get("start", 1e4), "rho_grid.start")
        stop = _as_float(grid.get("stop", 1e12), "rho_grid.stop")
        num = _as_int(grid.get("num", 33), "rho_grid.num")
        if grid.get("log", True):
            return list(np.logspace(math.log10(start), math.log10(stop), num))
        return list(np.linspace(start, stop, num))
    return [_as_float(g, "rho_grid value") for g in grid]


def _manifest(command: str, seed: int | None, resolved: dict[str, Any]) -> dict:
    manifest = {"command": command, "version": __version__, "config": resolved}
    if seed is not None:
        manifest["seed"] = seed
    return manifest


def _cmd_trial(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    seed = _resolve_seed(args)
    trial = _trial_config(cfg, args, seed)
    result = run_trial(trial)
    row = result.stats.as_row()
    row.update(theory_columns(trial.params, trial.eve))
    paths = emit_results([row], args.out, _manifest("trial", seed, {
        "trial": trial, "chain_length_histogram": result.stats.chain_length_histogram,
        "chain_sifted_histogram": result.stats.chain_sifted_histogram,
    }))
    s = result.stats
    print(f"trial: k={s.k:g} algorithm={s.algorithm} sifted={s.sifted_count} "
          f"rate={s.sifted_rate:.6g}/s qber={'-' if s.qber is None else f'{s.qber:.4f}'}")
    print(f"wrote {paths[0]} and {paths[1]}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    seed = _resolve_seed(args)
    spec = _sweep_spec(cfg, args, seed)
    rows = sweep_rows(spec)
    paths = emit_results(rows, args.out, _manifest("sweep", seed, {"sweep": spec}))
    print(f"sweep: {len(rows)} points over {spec.variable}, "
          f"algorithms={','.join(spec.effective_algorithms)}")
    print(f"wrote {paths[0]} and {paths[1]}")
    return 0


def _cmd_theory(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    params = _system_params(cfg, args)
    row: dict[str, Any] = {"k": params.k, "rho": params.rho, "eta": params.eta}

    def _try(fn, *fargs):
        try:
            return fn(*fargs)
        except AnalyticValidityError:
            return None

    row["p00_basis1"] = _try(analytic.p00_basis1, params.k, params.eta)
    row["p00_basis2"] = _try(analytic.p00_basis2_from_eta, params.k, params.eta)
    if row["p00_basis1"] is not None and row["p00_basis2"] is not None:
        row["availability_ratio"] = row["p00_basis2"] / row["p00_basis1"]
    else:
        row["availability_ratio"] = None
    row["rate_deactivate"] = _try(analytic.rate_deactivate, params)
    row["rate_4state"] = _try(analytic.rate_4state, params)
    if "decoy" in cfg or args.with_decoy:
        dp = _decoy_params(cfg, args, params)
        rates = analytic.decoy_rates(dp)
        row.update(y1=rates.y1, q1=rates.q1, q_mu=rates.q_mu, e_mu=rates.e_mu,
                   e1=rates.e1, r_naive=rates.r_naive, pa_decoy=rates.pa_decoy,
                   r_secure=rates.r_secure, r_per_second=rates.r_per_second,
                   secure=rates.secure,
                   rate_limit=analytic.decoy_rate_limit(dp))
    paths = emit_results([row], args.out,
                         _manifest("theory", None, {"params": params}))
    print(f"wrote {paths[0]} and {paths[1]}")
    return 0


def _cmd_decoy(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    params = _system_params(cfg, args)
    rows = []
    for rho in _decoy_grid(cfg, args):
        dp = _decoy_params(cfg, args, replace(params, rho=rho))
        rates = analytic.decoy_rates(dp)
        rows.append({
            "rho": rho, "k": dp.system.k, "q_mu": rates.q_mu,
            "pa_decoy": rates.pa_decoy,
            "rate_naive_per_second": rho * rates.r_naive,
            "rate_secure_per_second": rates.r_per_second,
            "rate_limit_per_second": analytic.decoy_rate_limit(dp),
            "secure": rates.secure,
        })
    paths = emit_results(rows, args.out, _manifest("decoy", None, {
        "params": params, "decoy": _decoy_params(cfg, args, params)}))
    print(f"decoy: {len(rows)} transmission-rate points")
    print(f"wrote {paths[0]} and {paths[1]}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    seed = _resolve_seed(args)
    if "sweep" in cfg or args.grid is not None:
        spec = _sweep_spec(cfg, args, seed)
    else:
        trial = _trial_config(cfg, args, seed)
        spec = SweepSpec(variable="k", grid=(trial.params.k,), base=trial)
    rows = add_z_scores(sweep_rows(spec), spec.effective_algorithms)
    paths = emit_results(rows, args.out, _manifest("compare", seed, {"sweep": spec}))
    print(f"compare: {len(rows)} rows, algorithms={','.join(spec.effective_algorithms)}")
    print(f"wrote {paths[0]} and {paths[1]}")
    return 0


def _add_common(p: argparse.ArgumentParser, seeded: bool) -> None:
    p.add_argument("--config", help="YAML config file; flags override it")
    p.add_argument("--out", required=True, help="output CSV path")
    if seeded:
        p.add_argument("--seed", type=int, help="RNG seed (required)")
        p.add_argument("--seed-from-entropy", action="store_true",
                       help="draw the seed from OS entropy instead")
    for flag, help_text in [
        ("--tau", "dead time in seconds"),
        ("--rho", "transmission rate in slots/second"),
        ("--k", "slots per dead time; sets rho = k / tau"),
        ("--alpha", "fiber loss in dB/km"),
        ("--length-km", "channel length in km"),
        ("--loss-db", "total channel loss in dB (overrides alpha * length)"),
        ("--t-bob", "receiver internal transmittance"),
        ("--eta-d", "detector efficiency"),
    ]:
        p.add_argument(flag, type=float, help=help_text)


def _add_trial_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--n-slots", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--strategy", choices=_EVE_STRATEGIES)
    p.add_argument("--fraction", type=float,
                   help="eavesdropper action fraction")


def _add_decoy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mu", type=float, help="mean photon number")
    p.add_argument("--y0", type=float, help="background count rate")
    p.add_argument("--e-det", type=float, help="misalignment error probability")
    p.add_argument("--e0", type=float, help="background error rate")
    p.add_argument("--f-ec", type=float, help="error-correction inefficiency")
    p.add_argument("--q-protocol", type=float, help="basis-match fraction")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deadtime-qkd",
        description="BB84 sifting and key rates under detector dead time")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trial", help="run one Monte Carlo trial")
    _add_common(p, seeded=True)
    _add_trial_flags(p)
    p.set_defaults(func=_cmd_trial)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    _add_common(p, seeded=True)
    _add_trial_flags(p)
    p.add_argument("--variable", choices=("k", "rho", "length_km"))
    p.add_argument("--grid", help="comma-separated grid values")
    p.add_argument("--algorithms", help="comma-separated algorithm list")
    p.add_argument("--trials-per-point", type=int)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("theory", help="evaluate closed forms only")
    _add_common(p, seeded=False)
    _add_decoy_flags(p)
    p.add_argument("--with-decoy", action="store_true",
                   help="include the decoy-state chain")
    p.set_defaults(func=_cmd_theory)

    p = sub.add_parser("decoy", help="decoy-state rate dataset over rho")
    _add_common(p, seeded=False)
    _add_decoy_flags(p)
    p.add_argument("--grid", help="comma-separated rho grid")
    p.set_defaults(func=_cmd_decoy)

    p = sub.add_parser("compare", help="simulation vs theory with z-scores")
    _add_common(p, seeded=True)
    _add_trial_flags(p)
    p.add_argument("--variable", choices=("k", "rho", "length_km"))
    p.add_argument("--grid", help="comma-separated grid values")
    p.add_argument("--algorithms", help="comma-separated algorithm list")
    p.add_argument("--trials-per-point", type=int)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, AnalyticValidityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
