"""Batch command-line interface.

Subcommands: ``run`` (grid experiment), ``baseline`` (max-effort sweep),
``limits`` (closed-form stock limits), ``control`` (forward-backward sweep
vs brute force), ``cic`` (signal influence of a checkpoint), ``replay``
(re-run from a manifest). Exits 0 on success, 1 on parameter errors and 2
on runtime failures.

A ``--config`` file is flat ``key=value`` text ('#' comments allowed); every
key mirrors the long CLI flag of the same name (without the leading dashes),
and explicit CLI flags win over file values.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analytics, control, env, harness, metrics
from .learner import PpoHyper, load_checkpoint


class CliError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); parameter errors are 1
        raise CliError(message)


def _parse_config_file(path) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def _int_list(text: str) -> list[int]:
    return [int(part) for part in str(text).split(",") if part.strip()]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in str(text).split(",") if part.strip()]


_HYPER_KEYS = {
    "lr": ("learning_rate", float),
    "clip": ("clip", float),
    "vf_clip": ("vf_clip", float),
    "kl_target": ("kl_target", float),
    "gamma": ("gamma", float),
    "gae_lambda": ("gae_lambda", float),
    "vf_coeff": ("vf_coeff", float),
    "entropy_coeff": ("entropy_coeff", float),
    "epochs": ("epochs_per_update", int),
    "minibatch": ("minibatch_size", int),
    "steps_per_update": ("steps_per_update", int),
}


def _merge(args: argparse.Namespace, file_values: dict[str, str], key: str, cast, default):
    cli_value = getattr(args, key.replace("-", "_"), None)
    if cli_value is not None:
        return cli_value
    if key in file_values:
        return cast(file_values[key])
    return default


def _add_run_flags(parser: _Parser):
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--agents", help="population sizes, comma separated")
    parser.add_argument("--ms", help="scarcity multipliers, comma separated")
    parser.add_argument("--signal", help="signal cardinalities, comma separated")
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--episodes", type=int)
    parser.add_argument("--tmax", type=int)
    parser.add_argument("--growth-rate", type=float)
    parser.add_argument("--emax", type=float)
    parser.add_argument("--out", help="output directory")
    for key in _HYPER_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", type=float)


def _build_hyper(args, file_values) -> PpoHyper:
    hyper = PpoHyper()
    for key, (attr, cast) in _HYPER_KEYS.items():
        value = _merge(args, file_values, key, cast, None)
        if value is not None:
            setattr(hyper, attr, cast(value))
    return hyper


def _cmd_run(args) -> int:
    file_values = _parse_config_file(args.config) if args.config else {}
    agents = _int_list(_merge(args, file_values, "agents", str, "4"))
    ms_values = _float_list(_merge(args, file_values, "ms", str, "0.5"))
    signal_values = _int_list(_merge(args, file_values, "signal", str, "1"))
    trials = _merge(args, file_values, "trials", int, 8)
    seed = _merge(args, file_values, "seed", int, 0)
    episodes = _merge(args, file_values, "episodes", int, 5000)
    t_max = _merge(args, file_values, "tmax", int, 500)
    growth_rate = _merge(args, file_values, "growth-rate", float, 1.0)
    e_max = _merge(args, file_values, "emax", float, 1.0)
    out = _merge(args, file_values, "out", str, None)
    if out is None:
        raise CliError("an output directory is required (--out)")
    hyper = _build_hyper(args, file_values)

    configs = [
        harness.ExperimentConfig(
            n_agents=n,
            m_s=m_s,
            signal_cardinality=g,
            growth_rate=growth_rate,
            e_max=e_max,
            max_episodes=episodes,
            t_max=t_max,
            trials=trials,
            base_seed=seed,
            hyper=hyper,
        )
        for n in agents
        for m_s in ms_values
        for g in signal_values
    ]
    result = harness.run_experiment(configs)
    harness.persist(result, out)
    for row in harness.summarize(result):
        print(
            f"{row['cell']}: SW={row['mean_social_welfare']:.4g} "
            f"len={row['mean_length']:.4g} CT={row['mean_convergence_time']:.4g} "
            f"CIC={row['mean_cic']:.4g} p={row['sw_p_value']:.4g}"
        )
    print(f"wrote {out}")
    return 0


def _cmd_baseline(args) -> int:
    import csv as _csv

    k = analytics.k_constant(args.growth_rate, args.emax)
    ms_grid = np.arange(args.ms_lo, args.ms_hi + 1e-12, args.ms_step)
    rows = []
    for n in _int_list(args.agents):
        block = []
        for m_s in ms_grid:
            params = env.EnvParams(
                n_agents=n, s_eq=float(m_s * k * n), growth_rate=args.growth_rate,
                e_max=args.emax, max_steps=args.tmax,
            )
            res = analytics.max_effort_baseline(params, args.tmax)
            block.append([n, float(m_s), params.s_eq, res.length, res.social_welfare])
        top = max(row[4] for row in block)
        rows += [row + [row[4] / top if top else 0.0] for row in block]

    header = ["n_agents", "m_s", "s_eq", "length", "social_welfare", "sw_normalized"]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "baseline.csv", "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([harness._fmt(v) for v in row])
        print(f"wrote {out / 'baseline.csv'}")
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(harness._fmt(v) for v in row))
    return 0


def _cmd_limits(args) -> int:
    for n in _int_list(args.agents):
        limits = analytics.theory_limits(n, args.growth_rate, args.emax)
        print(
            f"N={n} r={args.growth_rate:g}: S_LSH={limits.s_lsh:.6f} "
            f"S_LID={limits.s_lid:.6f} K={limits.k_const:.6f} Ms_LID={limits.ms_lid:.6f}"
        )
    lo, hi = analytics.growth_rate_bounds()
    print(f"stable growth rates: [{lo:.6f}, {hi:.6f}]")
    return 0


def _cmd_control(args) -> int:
    params = harness.ExperimentConfig(
        n_agents=args.agents,
        m_s=args.ms,
        signal_cardinality=1,
        growth_rate=args.growth_rate,
        e_max=args.emax,
        price=args.price,
        cost=args.cost,
    ).env_params()
    sweep = control.forward_backward_sweep(params, args.horizon)
    status = "converged" if sweep.converged else "NOT converged"
    print(f"sweep: objective={sweep.objective:.9g} ({status}, {sweep.iterations} iterations)")
    print("efforts:", " ".join(f"{e:g}" for e in sweep.efforts))
    if args.horizon <= 16:
        schedule, objective = control.brute_force_optimal(params, args.horizon)
        gap = objective - sweep.objective
        print(f"brute force: objective={objective:.9g} (gap {gap:.3g})")
        print("efforts:", " ".join(f"{e:g}" for e in schedule))
    else:
        print("brute force skipped (horizon > 16)")
    return 0


def _cmd_cic(args) -> int:
    agents = load_checkpoint(args.checkpoint, e_max=args.emax)
    rng = np.random.default_rng(args.seed)
    config = metrics.CicConfig(n_states=args.states, n_samples=args.samples, n_bins=args.bins)
    values = []
    for i, agent in enumerate(agents):
        value = metrics.cic(
            agent.sample_efforts,
            metrics.uniform_partial_state(args.emax),
            config,
            agent.g,
            args.emax,
            rng,
        )
        values.append(value)
        print(f"agent {i}: CIC={value:.6f}")
    print(f"mean CIC={np.mean(values):.6f}")
    return 0


def _cmd_replay(args) -> int:
    harness.replay(args.manifest, args.out)
    print(f"replayed into {args.out}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fishcoop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a grid experiment")
    _add_run_flags(run_p)
    run_p.set_defaults(func=_cmd_run)

    base_p = sub.add_parser("baseline", help="max-effort sweep over stock levels")
    base_p.add_argument("--agents", default="2,4,8,16")
    base_p.add_argument("--growth-rate", type=float, default=1.0)
    base_p.add_argument("--emax", type=float, default=1.0)
    base_p.add_argument("--tmax", type=int, default=500)
    base_p.add_argument("--ms-lo", type=float, default=0.2)
    base_p.add_argument("--ms-hi", type=float, default=1.3)
    base_p.add_argument("--ms-step", type=float, default=0.05)
    base_p.add_argument("--out")
    base_p.set_defaults(func=_cmd_baseline)

    limits_p = sub.add_parser("limits", help="print the closed-form stock limits")
    limits_p.add_argument("--agents", default="1,2,8,16,64")
    limits_p.add_argument("--growth-rate", type=float, default=1.0)
    limits_p.add_argument("--emax", type=float, default=1.0)
    limits_p.set_defaults(func=_cmd_limits)

    control_p = sub.add_parser("control", help="optimal-control sweep and oracle")
    control_p.add_argument("--agents", type=int, default=1)
    control_p.add_argument("--ms", type=float, default=None)
    control_p.add_argument("--seq", type=float, default=None)
    control_p.add_argument("--growth-rate", type=float, default=1.0)
    control_p.add_argument("--emax", type=float, default=1.0)
    control_p.add_argument("--price", type=float, default=1.0)
    control_p.add_argument("--cost", type=float, default=0.0)
    control_p.add_argument("--horizon", type=int, default=10)
    control_p.set_defaults(func=_cmd_control)

    cic_p = sub.add_parser("cic", help="signal influence of a saved checkpoint")
    cic_p.add_argument("--checkpoint", required=True)
    cic_p.add_argument("--emax", type=float, default=1.0)
    cic_p.add_argument("--bins", type=int, default=10)
    cic_p.add_argument("--states", type=int, default=100)
    cic_p.add_argument("--samples", type=int, default=100)
    cic_p.add_argument("--seed", type=int, default=0)
    cic_p.set_defaults(func=_cmd_cic)

    replay_p = sub.add_parser("replay", help="re-run an experiment from its manifest")
    replay_p.add_argument("--manifest", required=True)
    replay_p.add_argument("--out", required=True)
    replay_p.set_defaults(func=_cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) == "control":
            if args.ms is None and args.seq is None:
                args.ms = 1.0
            if args.seq is not None:
                # express the requested absolute stock as a multiplier
                k = analytics.k_constant(args.growth_rate, args.emax)
                args.ms = args.seq / (k * args.agents)
        return args.func(args)
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
