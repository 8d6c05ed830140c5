"""Command-line front end: ``afrelay solve|simulate|compare|sweep``.

Configs are flat ``key = value`` text; several ``key=value`` tokens may share
a line. ``#`` starts a comment. Matrix files referenced by relative path are
resolved against the config file's directory.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

from . import replica, simulate
from .errors import ConvergenceError, NumericError, ValidationError
from .model import (
    BeamformerSpec,
    ChannelConfig,
    CovarianceSpec,
    S2Variant,
    build_covariance,
    check_beamformer_trace,
)

REQUIRED = ("n_s", "n_r", "n_d", "rho", "alpha")
COV_KEYS = {"cov_Ts": "n_s", "cov_Rr": "n_r", "cov_Tr": "n_r", "cov_Rd": "n_d"}
BF_KEYS = {"precoder": "n_s", "forwarder": "n_r"}
KNOWN = set(REQUIRED) | set(COV_KEYS) | set(BF_KEYS) | {"s2_variant"}

DEFAULT_SAMPLES = 20_000


class ConfigError(ValidationError):
    def __init__(self, message, lineno=None, invariant=None):
        where = f"line {lineno}: " if lineno else ""
        super().__init__(where + message, invariant)
        self.lineno = lineno


def _split_line(line):
    """Yield ``(key, value)`` pairs from one config line."""
    if line.count("=") == 1:
        key, value = line.split("=")
        yield key.strip(), value.strip()
        return
    for tok in line.split():
        if tok.count("=") != 1:
            raise ValueError(f"malformed token {tok!r}")
        key, value = tok.split("=")
        yield key.strip(), value.strip()


def _cov_spec(value, base):
    parts = value.split(None, 1)
    if not parts:
        raise ValueError("empty covariance specification")
    kind = parts[0].lower()
    if kind == "identity" and len(parts) == 1:
        return CovarianceSpec.identity()
    if kind == "exponential" and len(parts) == 2:
        return CovarianceSpec.exponential(float(parts[1]))
    if kind in ("explicit", "file") and len(parts) == 2:
        return CovarianceSpec.explicit(base / parts[1].strip())
    raise ValueError(f"bad covariance specification {value!r}")


def _bf_spec(value, base):
    parts = value.split(None, 1)
    if parts == ["identity"]:
        return BeamformerSpec.identity()
    if len(parts) == 2 and parts[0].lower() in ("explicit", "file"):
        return BeamformerSpec.explicit(base / parts[1].strip())
    raise ValueError(f"bad beamformer specification {value!r}")


def _int(value):
    f = float(value)
    if not f.is_integer():
        raise ValueError(f"expected an integer, got {value!r}")
    return int(f)


def parse_config(text: str, base_dir=None) -> ChannelConfig:
    """Parse and fully validate a scenario config."""
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            pairs = list(_split_line(line))
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, "format") from None
        for key, value in pairs:
            if key not in KNOWN:
                raise ConfigError(f"unknown key {key!r}", lineno, key)
            if key in values:
                raise ConfigError(f"duplicate key {key!r}", lineno, key)
            try:
                if key in ("n_s", "n_r", "n_d"):
                    values[key] = _int(value)
                elif key in ("rho", "alpha"):
                    values[key] = float(value)
                elif key in COV_KEYS:
                    values[key] = _cov_spec(value, base)
                elif key in BF_KEYS:
                    values[key] = _bf_spec(value, base)
                else:
                    values[key] = S2Variant.parse(value)
            except (ValueError, ValidationError) as exc:
                raise ConfigError(f"{key}: {exc}", lineno, key) from None
            lines[key] = lineno
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}", None, key)

    try:
        config = ChannelConfig(**values)
    except ValidationError as exc:
        raise ConfigError(str(exc), lines.get(exc.invariant), exc.invariant) from None

    for key, dim_key in COV_KEYS.items():
        try:
            build_covariance(getattr(config, key), getattr(config, dim_key))
        except ValidationError as exc:
            raise ConfigError(f"{key}: {exc}", lines.get(key), exc.invariant) from None
    for key, dim_key in BF_KEYS.items():
        try:
            check_beamformer_trace(getattr(config, key).resolve(getattr(config, dim_key)), key)
        except ValidationError as exc:
            raise ConfigError(f"{key}: {exc}", lines.get(key), exc.invariant) from None
    try:
        config.effective_covariances()
    except ValidationError as exc:
        raise ConfigError(str(exc), None, exc.invariant) from None
    return config


def load_config(path) -> ChannelConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


# --------------------------------------------------------------------------
# runs


@dataclass(frozen=True)
class RunSpec:
    command: str
    config: ChannelConfig
    samples: Optional[int] = None
    seed: int = 0
    sweep_param: Optional[str] = None
    values: Sequence[float] = ()
    out: Optional[str] = None
    bits: bool = False
    half_duplex: bool = False
    batch_size: int = simulate.DEFAULT_BATCH_SIZE
    workers: int = 1
    dump: Optional[str] = None

    def __post_init__(self):
        if self.command not in ("solve", "simulate", "compare", "sweep"):
            raise ValidationError(f"unknown command {self.command!r}", "command")
        if self.command in ("simulate", "compare") and self.n_samples < 4:
            raise ValidationError("simulate/compare need at least 4 samples", "samples")
        if self.command == "sweep":
            if self.sweep_param not in ("rho", "alpha"):
                raise ValidationError("sweep needs --sweep-param rho|alpha", "sweep_param")
            if len(self.values) < 1:
                raise ValidationError("sweep needs at least one value", "values")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer", "seed")

    @property
    def n_samples(self) -> int:
        if self.samples is not None:
            return self.samples
        return 0 if self.command == "sweep" else DEFAULT_SAMPLES

    @property
    def scale(self) -> float:
        """Multiplier applied to nats-valued mean-like outputs."""
        s = 1.0 / math.log(2.0) if self.bits else 1.0
        return 0.5 * s if self.half_duplex else s

    @property
    def unit(self) -> str:
        return "bits" if self.bits else "nats"


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    if isinstance(x, str):
        return x
    return f"{float(x):.15e}"


def _csv(header: List[str], rows: List[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def _rel_err(estimate, reference):
    if reference == 0.0:
        return 0.0 if estimate == reference else float("nan")
    return (estimate - reference) / abs(reference)


SOLVE_HEADER = ["s2_variant", "unit", "s1", "s2", "s3", "t1", "t2", "t3", "residual", "iterations",
                "mean", "variance", "logdet_V1", "logdet_V2", "logdet_V3"]


def run_solve(spec: RunSpec) -> str:
    r = replica.evaluate(spec.config)
    p, k = r.saddle, spec.scale
    row = [spec.config.s2_variant.value, spec.unit, p.s1, p.s2, p.s3, p.t1, p.t2, p.t3,
           p.residual, p.iterations, r.mean_nats * k, r.variance_nats2 * k * k,
           r.logdet_V1, r.logdet_V2, r.logdet_V3]
    return _csv(SOLVE_HEADER, [row])


SIMULATE_HEADER = ["unit", "samples", "seed", "k1", "se1", "k2", "se2", "k3", "k4",
                   "skewness", "excess_kurtosis"]


def _monte_carlo(spec: RunSpec, config=None):
    mc = simulate.monte_carlo(
        config or spec.config, spec.n_samples, spec.seed,
        batch_size=spec.batch_size, workers=spec.workers, keep_samples=True,
    )
    if spec.dump:
        simulate.write_samples(spec.dump, mc.samples)
    return mc


def run_simulate(spec: RunSpec) -> str:
    c = _monte_carlo(spec).cumulants
    k = spec.scale
    row = [spec.unit, c.count, spec.seed, c.k1 * k, c.se1 * k, c.k2 * k**2, c.se2 * k**2,
           c.k3 * k**3, c.k4 * k**4, c.skewness, c.excess_kurtosis]
    return _csv(SIMULATE_HEADER, [row])


COMPARE_HEADER = ["s2_variant", "unit", "samples", "seed", "replica_mean", "replica_variance",
                  "mc_k1", "mc_se1", "mc_k2", "mc_se2", "mc_k3", "mc_k4",
                  "mean_rel_err", "variance_rel_err", "ks_distance"]


def run_compare(spec: RunSpec) -> str:
    r = replica.evaluate(spec.config)
    mc = _monte_carlo(spec)
    c = mc.cumulants
    if r.variance_nats2 > 1e-12:
        ks = simulate.ks_distance(mc.samples, r.mean_nats, r.variance_nats2)
    else:
        ks = float("nan")
    k = spec.scale
    row = [spec.config.s2_variant.value, spec.unit, c.count, spec.seed,
           r.mean_nats * k, r.variance_nats2 * k**2,
           c.k1 * k, c.se1 * k, c.k2 * k**2, c.se2 * k**2, c.k3 * k**3, c.k4 * k**4,
           _rel_err(r.mean_nats, c.k1), _rel_err(r.variance_nats2, c.k2), ks]
    return _csv(COMPARE_HEADER, [row])


def run_sweep(spec: RunSpec):
    """Return ``(csv_text, all_ok)``; failed points become ``error`` rows."""
    with_mc = spec.n_samples > 0
    header = ["param", "value", "status", "s2_variant", "unit", "mean", "variance"]
    if with_mc:
        header += ["mc_k1", "mc_se1", "mc_k2", "mc_se2"]
    rows, ok = [], True
    k = spec.scale
    for value in spec.values:
        try:
            config = dataclasses.replace(spec.config, **{spec.sweep_param: value})
            r = replica.evaluate(config)
            row = [spec.sweep_param, value, "ok", config.s2_variant.value, spec.unit,
                   r.mean_nats * k, r.variance_nats2 * k**2]
            if with_mc:
                c = simulate.monte_carlo(config, spec.n_samples, spec.seed,
                                         batch_size=spec.batch_size, workers=spec.workers).cumulants
                row += [c.k1 * k, c.se1 * k, c.k2 * k**2, c.se2 * k**2]
        except (ConvergenceError, NumericError, ValidationError) as exc:
            ok = False
            msg = str(exc).replace("\n", " ")
            row = [spec.sweep_param, value, f"error: {msg}", spec.config.s2_variant.value, spec.unit,
                   None, None] + ([None] * 4 if with_mc else [])
        rows.append(row)
    return _csv(header, rows), ok


# --------------------------------------------------------------------------
# entry point


def _values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad value list {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="afrelay", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["solve", "simulate", "compare", "sweep"])
    p.add_argument("--config", required=True, help="scenario config file")
    p.add_argument("--samples", type=int, default=None,
                   help=f"Monte Carlo samples (default {DEFAULT_SAMPLES}; 0 for sweep)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sweep-param", choices=["rho", "alpha"])
    p.add_argument("--values", type=_values, default=[])
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--bits", action="store_true", help="report in bits instead of nats")
    p.add_argument("--half-duplex", action="store_true", help="apply the 1/2 pre-log")
    p.add_argument("--s2-variant", choices=["printed", "consistent", "as_printed", "scalar_consistent"])
    p.add_argument("--batch-size", type=int, default=simulate.DEFAULT_BATCH_SIZE)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump", help="write Monte Carlo samples, one per line")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.s2_variant:
            config = dataclasses.replace(config, s2_variant=S2Variant.parse(args.s2_variant))
        spec = RunSpec(
            command=args.command, config=config, samples=args.samples, seed=args.seed,
            sweep_param=args.sweep_param, values=args.values, out=args.out, bits=args.bits,
            half_duplex=args.half_duplex, batch_size=args.batch_size, workers=args.workers,
            dump=args.dump,
        )
    except (OSError, ValidationError) as exc:
        print(f"afrelay: {exc}", file=sys.stderr)
        return 2

    ok = True
    try:
        if spec.command == "solve":
            text = run_solve(spec)
        elif spec.command == "simulate":
            text = run_simulate(spec)
        elif spec.command == "compare":
            text = run_compare(spec)
        else:
            text, ok = run_sweep(spec)
    except (ConvergenceError, NumericError, ValidationError) as exc:
        print(f"afrelay: {exc}", file=sys.stderr)
        return 1

    if spec.out:
        with open(spec.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
