"""Experiment runner: config parsing, dispatch, CSV/JSON output.

Configuration comes from ``key = value`` lines in a file and/or command-line
flags (flags win).  Every experiment is reproducible from its master seed;
per-trial seeds are mix64(master, trial index), so results do not depend on
the thread count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

import asepmix
from asepmix.configs import Interval, perm_to_text
from asepmix.errors import AsepmixError, ConfigurationError
from asepmix.rng import mix64

_SCHEMAS: dict[str, dict[str, set[str]]] = {
    "sample-mallows": {"required": {"n", "q", "trials"}, "optional": {"seed", "out", "format"}},
    "simulate": {"required": {"n", "q", "t", "trials"}, "optional": {"seed", "out", "format"}},
    "tv-exact": {"required": {"n", "q", "times"}, "optional": {"out", "format"}},
    "tv-mc": {
        "required": {"n", "q", "times", "trials"},
        "optional": {"seed", "theta", "threads", "out", "format"},
    },
    "profile": {
        "required": {"n", "q", "trials"},
        "optional": {"tau_min", "tau_max", "tau_step", "taus", "seed", "theta", "threads", "out", "format"},
    },
    "lemma53": {
        "required": {"n", "q", "tau", "trials"},
        "optional": {"seed", "threads", "out", "format"},
    },
    "shift-invariance": {
        "required": {"n", "q", "b", "t", "trials"},
        "optional": {"seed", "threads", "out", "format"},
    },
    "skew-reversibility": {
        "required": {"n", "q", "b", "t", "trials"},
        "optional": {"seed", "threads", "out", "format"},
    },
    "hitting": {
        "required": {"m", "q", "trials"},
        "optional": {"n", "seed", "horizon", "threads", "out", "format"},
    },
    "osp": {"required": {"n", "trials"}, "optional": {"seed", "threads", "out", "format"}},
    "hecke-verify": {"required": set(), "optional": {"n", "q", "orders", "out", "format"}},
    "tw-table": {"required": set(), "optional": {"step", "out", "format"}},
}

_INT_KEYS = {"n", "trials", "seed", "theta", "threads", "orders", "m"}
_FLOAT_KEYS = {"t", "tau", "b", "tau_min", "tau_max", "tau_step", "step", "horizon"}
_LIST_KEYS = {"times", "taus"}


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)

    def require(self, key: str):
        if key not in self.params:
            raise ConfigurationError(f"missing required key '{key}' for {self.subcommand}")
        return self.params[key]

    def get(self, key: str, default=None):
        return self.params.get(key, default)


@dataclass
class ResultRow:
    experiment: str
    trial: str
    statistic: str
    value: float | int | str
    stderr: float | None = None
    seed: int | None = None
    params: dict = field(default_factory=dict)


def parse_q(text: str) -> Fraction:
    text = str(text).strip()
    try:
        if "/" in text:
            num, den = text.split("/")
            q = Fraction(int(num), int(den))
        else:
            q = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"cannot parse q={text!r} as an exact rational") from exc
    if not 0 <= q < 1:
        raise ConfigurationError(f"q must lie in [0, 1), got {q}")
    return q


def _coerce(key: str, raw):
    if isinstance(raw, (int, float, list, Fraction)):
        return raw
    text = str(raw).strip()
    try:
        if key == "q":
            return parse_q(text)
        if key in _INT_KEYS:
            return int(text)
        if key in _FLOAT_KEYS:
            return float(text)
        if key in _LIST_KEYS:
            return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad value for '{key}': {text!r}") from exc
    return text


def parse_config(text: str, subcommand: str) -> RunConfig:
    """Parse 'key = value' lines against the subcommand's schema."""
    if subcommand not in _SCHEMAS:
        raise ConfigurationError(f"unknown subcommand {subcommand!r}")
    schema = _SCHEMAS[subcommand]
    params: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "q":
            params[key] = parse_q(value)
        elif key in schema["required"] | schema["optional"]:
            params[key] = _coerce(key, value)
        else:
            raise ConfigurationError(f"unknown key '{key}' for {subcommand}")
    return RunConfig(subcommand, params)


def _finish_config(cfg: RunConfig) -> RunConfig:
    schema = _SCHEMAS[cfg.subcommand]
    for key in schema["required"]:
        if key not in cfg.params:
            raise ConfigurationError(f"missing required key '{key}' for {cfg.subcommand}")
    cfg.params.setdefault("seed", 0)
    cfg.params.setdefault(
        "threads", int(os.environ.get("ASEPMIX_THREADS", "1"))
    )
    cfg.params.setdefault("format", "csv")
    return cfg


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def run(config: RunConfig) -> list[ResultRow]:
    """Execute one experiment; deterministic given (config, seed)."""
    config = _finish_config(config)
    name = config.subcommand
    p = config.params
    seed = int(p.get("seed", 0))
    threads = int(p.get("threads", 1))
    rows: list[ResultRow] = []

    if name == "sample-mallows":
        from asepmix.mallows import MallowsMeasure, sample_mallows

        measure = MallowsMeasure(Interval(1, config.require("n")), p["q"])
        for trial in range(config.require("trials")):
            w = sample_mallows(measure, random.Random(mix64(seed, trial)))
            rows.append(ResultRow(name, str(trial), "permutation", perm_to_text(w), seed=seed))

    elif name == "simulate":
        from asepmix import _kernels as K

        N = config.require("n")
        t = float(config.require("t"))
        out_vals = np.empty((config.require("trials"), N), np.int64)
        vals0 = np.arange(1, N + 1, dtype=np.int64)
        K.sim_final_values(
            np.uint64(seed), 0, out_vals.shape[0], 1, vals0, float(p["q"]), t,
            K.calendar_buckets(max(N - 1, 1)), out_vals,
        )
        for trial in range(out_vals.shape[0]):
            text = ",".join(str(v) for v in out_vals[trial])
            rows.append(ResultRow(name, str(trial), "permutation", text, seed=seed))

    elif name == "tv-exact":
        from asepmix.mixing import exact_tv_table

        for t, tv in exact_tv_table(config.require("n"), p["q"], config.require("times")):
            rows.append(ResultRow(name, "aggregate", "tv", tv, seed=seed, params={"t": t}))

    elif name == "tv-mc":
        from asepmix.mixing import mc_tv_lower, mc_tv_upper

        N, q, ts = config.require("n"), p["q"], config.require("times")
        trials = config.require("trials")
        upper = mc_tv_upper(N, float(q), ts, trials, mix64(seed, 11), threads=threads)
        lower = mc_tv_lower(
            N, float(q), ts, theta=p.get("theta"), trials=trials,
            seed=mix64(seed, 13), threads=threads,
        )
        for up, lo in zip(upper, lower):
            rows.append(
                ResultRow(name, "aggregate", "tv_upper", up.estimate, up.stderr, seed,
                          params={"t": up.t})
            )
            rows.append(
                ResultRow(name, "aggregate", "tv_lower", lo.estimate, lo.stderr, seed,
                          params={"t": lo.t})
            )

    elif name == "profile":
        from asepmix.mixing import ExperimentPlan, profile_curve

        if "taus" in p:
            taus = tuple(float(x) for x in p["taus"])
        else:
            lo = float(p.get("tau_min", -2.0))
            hi = float(p.get("tau_max", 2.0))
            step = float(p.get("tau_step", 1.0))
            count = int(round((hi - lo) / step)) + 1
            taus = tuple(lo + i * step for i in range(count))
        plan = ExperimentPlan(
            N=config.require("n"), q=float(p["q"]), taus=taus,
            trials=config.require("trials"), seed=seed, threads=threads,
            theta=p.get("theta"),
        )
        for point in profile_curve(plan):
            for stat, val, se in (
                ("tv_upper", point.tv_upper, point.tv_upper_se),
                ("tv_lower", point.tv_lower, point.tv_lower_se),
                ("goe_reference", point.goe_reference, None),
            ):
                rows.append(
                    ResultRow(name, "aggregate", stat, val, se, seed,
                              params={"tau": point.tau, "t": point.t})
                )

    elif name == "lemma53":
        from asepmix.mixing import lemma53_batch

        samples = lemma53_batch(
            config.require("n"), float(p["q"]), float(config.require("tau")),
            config.require("trials"), seed, threads=threads,
        )
        for trial, val in enumerate(samples):
            rows.append(ResultRow(name, str(trial), "statistic", float(val), seed=seed))

    elif name in ("shift-invariance", "skew-reversibility"):
        from asepmix.mixing import shift_invariance_probe, skew_reversibility_probe

        probe = shift_invariance_probe if name == "shift-invariance" else skew_reversibility_probe
        res = probe(
            config.require("n"), float(p["q"]), float(config.require("b")),
            float(config.require("t")), config.require("trials"), seed, threads=threads,
        )
        rows.append(ResultRow(name, "aggregate", "p_first", res.p_first, res.se_first, seed))
        rows.append(ResultRow(name, "aggregate", "p_second", res.p_second, res.se_second, seed))
        rows.append(ResultRow(name, "aggregate", "z", res.z, seed=seed))

    elif name == "hitting":
        from asepmix.simulate import hitting_time_H

        n0 = int(p.get("n", 0))
        m = config.require("m")
        for trial in range(config.require("trials")):
            res = hitting_time_H(n0, m, float(p["q"]), mix64(seed, trial),
                                 horizon=p.get("horizon"))
            rows.append(
                ResultRow(name, str(trial), "hitting_time", res.time, seed=seed,
                          params={"censored": int(res.censored)})
            )

    elif name == "osp":
        from asepmix.simulate import osp_absorbing_time

        for trial in range(config.require("trials")):
            res = osp_absorbing_time(config.require("n"), mix64(seed, trial))
            rows.append(
                ResultRow(name, str(trial), "absorbing_time", res.time, seed=seed,
                          params={"censored": int(res.censored)})
            )

    elif name == "hecke-verify":
        from asepmix.hecke import run_exactness_checks

        size = int(p.get("n", 3))
        qs = [p["q"]] if "q" in p else [Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]
        orders = int(p.get("orders", 8))
        for q in qs:
            for check, ok in run_exactness_checks(size, q, orders).items():
                rows.append(
                    ResultRow(name, "aggregate", check, "exact-pass" if ok else "FAIL",
                              seed=seed, params={"q": str(q)})
                )

    elif name == "tw-table":
        from asepmix.tracywidom import GoeDistribution

        dist = GoeDistribution()
        for s, qv, fv in dist.reference_table(float(p.get("step", 0.05))):
            rows.append(ResultRow(name, "aggregate", "f_goe", fv, seed=seed,
                                  params={"s": round(s, 10), "q": qv}))

    else:
        raise ConfigurationError(f"unknown subcommand {name!r}")
    return rows


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

PROFILE_HEADER = "tau,t,tv_upper,tv_upper_se,tv_lower,tv_lower_se,goe_reference"
GENERIC_HEADER = "experiment,trial,statistic,value,stderr,seed,params"


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(rows: list[ResultRow], experiment: str) -> str:
    if experiment == "profile":
        by_tau: dict[float, dict[str, tuple]] = {}
        order: list[float] = []
        for row in rows:
            tau = row.params["tau"]
            if tau not in by_tau:
                by_tau[tau] = {"t": row.params["t"]}
                order.append(tau)
            by_tau[tau][row.statistic] = (row.value, row.stderr)
        lines = [PROFILE_HEADER]
        for tau in order:
            rec = by_tau[tau]
            up, up_se = rec["tv_upper"]
            lo, lo_se = rec["tv_lower"]
            ref, _ = rec["goe_reference"]
            lines.append(
                ",".join(
                    _format_value(v) for v in (tau, rec["t"], up, up_se, lo, lo_se, ref)
                )
            )
        return "\n".join(lines) + "\n"
    lines = [GENERIC_HEADER]
    for row in rows:
        params = ";".join(f"{k}={_format_value(v)}" for k, v in sorted(row.params.items()))
        lines.append(
            ",".join(
                (
                    row.experiment,
                    row.trial,
                    row.statistic,
                    _format_value(row.value),
                    "" if row.stderr is None else _format_value(row.stderr),
                    "" if row.seed is None else str(row.seed),
                    params,
                )
            )
        )
    return "\n".join(lines) + "\n"


def render_json_summary(rows: list[ResultRow], config: RunConfig) -> str:
    stats: dict[str, list[float]] = {}
    for row in rows:
        if isinstance(row.value, (int, float)):
            stats.setdefault(row.statistic, []).append(float(row.value))
    aggregates = {}
    for stat, vals in stats.items():
        arr = np.asarray(vals)
        aggregates[stat] = {
            "count": int(arr.size),
            "mean": float(arr.mean()),
            "min": float(arr.min()),
            "max": float(arr.max()),
        }
    payload = {
        "experiment": config.subcommand,
        "version": asepmix.__version__,
        "master_seed": int(config.params.get("seed", 0)),
        "params": {
            k: (str(v) if isinstance(v, Fraction) else v)
            for k, v in sorted(config.params.items())
        },
        "aggregates": aggregates,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_results(rows: list[ResultRow], path: str | None, fmt: str, config: RunConfig) -> str:
    if fmt == "csv":
        text = render_csv(rows, config.subcommand)
    elif fmt == "json-summary":
        text = render_json_summary(rows, config)
    else:
        raise ConfigurationError(f"unknown format {fmt!r}")
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        try:
            with open(path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise AsepmixError(f"cannot write {path}: {exc}") from exc
    return text


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asepmix", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _SCHEMAS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--format", choices=["csv", "json-summary"])
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--n", type=int)
        sp.add_argument("--m", type=int)
        sp.add_argument("--q")
        sp.add_argument("--t", type=float)
        sp.add_argument("--b", type=float)
        sp.add_argument("--tau", type=float)
        sp.add_argument("--tau-min", type=float, dest="tau_min")
        sp.add_argument("--tau-max", type=float, dest="tau_max")
        sp.add_argument("--tau-step", type=float, dest="tau_step")
        sp.add_argument("--times")
        sp.add_argument("--taus")
        sp.add_argument("--theta", type=int)
        sp.add_argument("--orders", type=int)
        sp.add_argument("--step", type=float)
        sp.add_argument("--horizon", type=float)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    name = args.subcommand
    try:
        if args.config:
            with open(args.config) as fh:
                config = parse_config(fh.read(), name)
        else:
            config = RunConfig(name)
        schema = _SCHEMAS[name]
        valid = schema["required"] | schema["optional"]
        for key in sorted(valid | {"out"}):
            flag_val = getattr(args, key, None)
            if flag_val is not None:
                config.params[key] = _coerce(key, flag_val)
        fmt = config.params.get("format", "csv")
        out = config.params.get("out")
        rows = run(config)
        write_results(rows, out, fmt, config)
        if name == "hecke-verify" and any(r.value == "FAIL" for r in rows):
            return 1
        return 0
    except AsepmixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
