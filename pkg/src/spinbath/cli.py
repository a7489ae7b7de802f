"""Command-line front end.

Settings are resolved as defaults < SPINBATH_SEED < --config file < flags.
Exit status: 0 on success, 2 for usage and configuration errors, 1 for
numeric, validation and I/O failures.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import agreement, experiments, kernels, output
from .errors import ConfigError, SpinBathError
from .model import ConstantCoupling, TimeGrid, UniformCoupling, make_random_ensemble

COMMANDS = ("simulate", "figure", "fit", "oracle-check", "sweep")
DECOMPOSITIONS = ("original-d1", "original-d2", "general-d1", "general-d2")
SEED_ENV = "SPINBATH_SEED"
DEFAULT_T0 = {"original-d1": 3e-6, "original-d2": 3e-2, "general-d1": 1e-3, "general-d2": 1e-3}


class UsageError(Exception):
    pass


def _ints(text: str) -> Tuple[int, ...]:
    out = []
    for part in text.split(","):
        v = float(part.strip())
        if v != int(v):
            raise ValueError(f"{part!r} is not an integer")
        out.append(int(v))
    return tuple(out)


def _int(text: str) -> int:
    (v,) = _ints(text)
    return v


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"{text!r} not one of {', '.join(options)}")
        return text
    return parse


# key -> parser for config-file values
SCHEMA = {
    "m": _ints, "n": _ints, "g": float, "g_max": float, "t0": float, "points": _int,
    "seed": _int, "decomposition": _choice(DECOMPOSITIONS), "power_exponent": float,
    "out": str, "svg": str, "log_y": _bool, "id": _int, "input": str, "curve": str,
    "workers": _int, "seeds": _int, "j": _int, "full": _bool,
}
# keys left out of output metadata: paths and knobs that do not change results
NOT_ECHOED = ("out", "svg", "log_y", "workers", "input")


@dataclass
class RunConfig:
    command: str
    m: Optional[Tuple[int, ...]] = None
    n: Optional[Tuple[int, ...]] = None
    g: Optional[float] = None
    g_max: Optional[float] = None
    t0: Optional[float] = None
    points: int = 200
    seed: int = 0
    decomposition: Optional[str] = None
    power_exponent: float = 0.0
    out: Optional[str] = None
    svg: Optional[str] = None
    log_y: bool = False
    id: Optional[int] = None
    input: Optional[str] = None
    curve: Optional[str] = None
    workers: int = 1
    seeds: Optional[int] = None
    j: Optional[int] = None
    full: bool = False

    def metadata(self) -> Dict[str, object]:
        meta: Dict[str, object] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in NOT_ECHOED or v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            meta[f.name] = v
        return meta


def read_config_file(path) -> Dict[str, object]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values: Dict[str, object] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    with fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or not key:
                raise ConfigError("expected 'key = value'", ln)
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}", ln)
            try:
                values[key] = SCHEMA[key](val.strip())
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}", ln) from None
    return values


def _merge(layers: List[Dict[str, object]]) -> Dict[str, object]:
    merged: Dict[str, object] = {}
    for layer in layers:
        if "g" in layer and "g_max" in layer:
            raise UsageError("give either g or g_max, not both")
        if "g" in layer:
            merged.pop("g_max", None)
        if "g_max" in layer:
            merged.pop("g", None)
        merged.update(layer)
    return merged


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinbath", description="Spin-bath decoherence simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value file; flags override it")
        sp.add_argument("--seed", type=_int)
        sp.add_argument("--workers", type=_int, help="threads over time points (output unaffected)")

    def grid(sp):
        sp.add_argument("--t0", type=float, help="end of the time grid in seconds")
        sp.add_argument("--points", type=_int, help="number of grid intervals (default 200)")

    def outputs(sp):
        sp.add_argument("--out", help="CSV path (default: stdout)")
        sp.add_argument("--svg", help="also write an SVG plot here")
        sp.add_argument("--log-y", dest="log_y", action="store_const", const=True)

    sp = sub.add_parser("simulate", help="one series for a chosen decomposition")
    common(sp), grid(sp), outputs(sp)
    sp.add_argument("--m", type=_ints)
    sp.add_argument("--n", type=_ints)
    sp.add_argument("--g", type=float)
    sp.add_argument("--g-max", dest="g_max", type=float)
    sp.add_argument("--decomposition", type=_choice(DECOMPOSITIONS))
    sp.add_argument("--power-exponent", dest="power_exponent", type=float)
    sp.add_argument("--j", type=_int, help="observed environment spin for original-d2 (1-based)")

    sp = sub.add_parser("figure", help="reproduce a figure's curves")
    common(sp), grid(sp), outputs(sp)
    sp.add_argument("--id", type=_int)
    sp.add_argument("--full", action="store_const", const=True,
                    help="evaluate every N directly instead of power scaling")

    sp = sub.add_parser("fit", help="fit an exponential decay time to a CSV curve")
    sp.add_argument("--config")
    sp.add_argument("--input")
    sp.add_argument("--curve", help="column label (default: first curve)")
    sp.add_argument("--power-exponent", dest="power_exponent", type=float)

    sp = sub.add_parser("oracle-check", help="compare kernels with the dense simulator")
    sp.add_argument("--config")
    sp.add_argument("--m", type=_ints, help="largest system size")
    sp.add_argument("--n", type=_ints, help="largest environment size")
    sp.add_argument("--seeds", type=_int, help="number of seeds (default 20)")

    sp = sub.add_parser("sweep", help="verdict table over (M, N) pairs")
    common(sp), grid(sp)
    sp.add_argument("--out", help="CSV path (default: stdout)")
    sp.add_argument("--m", type=_ints, help="comma-separated system sizes")
    sp.add_argument("--n", type=_ints, help="comma-separated environment sizes")
    sp.add_argument("--decomposition", type=_choice(("general-d1", "general-d2")))
    return p


def parse_config(argv: List[str], environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    args = build_parser().parse_args(argv)
    layers: List[Dict[str, object]] = []
    if environ.get(SEED_ENV):
        try:
            layers.append({"seed": _int(environ[SEED_ENV])})
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer") from None
    if getattr(args, "config", None):
        layers.append(read_config_file(args.config))
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
    layers.append(flags)
    merged = _merge(layers)
    return RunConfig(command=args.command, **merged)


# --------------------------------------------------------------------------
# Commands


def _single(values, name, default=None):
    if values is None:
        if default is None:
            raise UsageError(f"--{name} is required")
        return default
    if len(values) != 1:
        raise UsageError(f"--{name} takes a single value here")
    return values[0]


def _g_mode(cfg: RunConfig):
    if cfg.g_max is not None:
        return UniformCoupling(cfg.g_max)
    return ConstantCoupling(400.0 if cfg.g is None else cfg.g)


def _write_series(cfg: RunConfig, series, stdout, title=""):
    meta = cfg.metadata()
    if cfg.out:
        output.emit_csv(series, cfg.out, meta)
    else:
        stdout.write(output.format_csv(series, meta))
    if cfg.svg:
        output.emit_svg(series, cfg.svg, cfg.log_y, title)


def cmd_simulate(cfg: RunConfig, stdout):
    dec = cfg.decomposition or "original-d1"
    cfg.decomposition = dec
    n = _single(cfg.n, "n")
    if cfg.t0 is None:
        cfg.t0 = DEFAULT_T0[dec]
    grid = TimeGrid(cfg.t0, cfg.points)
    g_mode = _g_mode(cfg)
    if dec.startswith("original"):
        if _single(cfg.m, "m", 1) != 1:
            raise UsageError("the original model has a single system spin; drop --m or use --m 1")
        ens = make_random_ensemble(n, cfg.seed, g_mode)
        if dec == "original-d1":
            s = experiments.series_r2(ens, grid, cfg.workers)
            if cfg.power_exponent:
                s = experiments.power_scale(s, cfg.power_exponent)
        else:
            if cfg.power_exponent:
                raise UsageError("--power-exponent applies to original-d1 only")
            j = cfg.j or 1
            vals = kernels.expectation_original_d2(j, ens, np.ones((2, 2)), grid.samples)
            s = experiments.TimeSeries(grid.samples, vals, None, f"d2_j{j}")
    else:
        if cfg.power_exponent:
            raise UsageError("--power-exponent applies to original-d1 only")
        m = _single(cfg.m, "m")
        config = experiments.SigmaConfig(m, n, dec, cfg.seed, g_mode)
        s = experiments.series_sigma_nd(config, grid, cfg.workers, label="sigma_nd")
    _write_series(cfg, [s], stdout, f"{dec}, N={n}")
    return 0


def cmd_figure(cfg: RunConfig, stdout):
    if cfg.id is None:
        raise UsageError("--id is required")
    bundle = experiments.run_figure(cfg.id, cfg.seed, cfg.full, cfg.points, cfg.t0, cfg.workers)
    cfg.t0 = bundle.metadata.get("t0", cfg.t0)
    meta_extra = {k: v for k, v in bundle.metadata.items() if k not in ("seed", "points", "t0")}
    meta = {**cfg.metadata(), **meta_extra}
    if cfg.out:
        output.emit_csv(bundle.series, cfg.out, meta)
    else:
        stdout.write(output.format_csv(bundle.series, meta))
    if cfg.svg:
        output.emit_svg(bundle.series, cfg.svg, cfg.log_y, f"Figure {cfg.id}")
    return 0


def cmd_fit(cfg: RunConfig, stdout):
    if not cfg.input:
        raise UsageError("--input is required")
    _, series = output.read_csv(cfg.input)
    labels = [s.label for s in series]
    label = cfg.curve or labels[0]
    if label not in labels:
        raise UsageError(f"no curve {label!r}; available: {', '.join(labels)}")
    s = series[labels.index(label)]
    if cfg.power_exponent:
        with np.errstate(divide="ignore"):
            s = experiments.power_scale(experiments.TimeSeries.from_log(s.times, np.log(s.values), label),
                                        cfg.power_exponent)
    fit = experiments.fit_decoherence_time(s)
    stdout.write(f"curve={label} tau={fit.tau!r} window={fit.window[0]}..{fit.window[1]} "
                 f"samples={fit.n_samples} residual={fit.residual:.6g}\n")
    return 0


def cmd_oracle_check(cfg: RunConfig, stdout):
    max_m = _single(cfg.m, "m", 3)
    max_n = _single(cfg.n, "n", 3)
    cases = agreement.run_agreement(max_m, max_n, cfg.seeds or 20)
    for line in agreement.summarize(cases):
        stdout.write(line + "\n")
    bad = [c for c in cases if not c.ok]
    stdout.write(f"{len(cases)} cases, {len(bad)} above {agreement.TOLERANCE:g}\n")
    return 1 if bad else 0


def cmd_sweep(cfg: RunConfig, stdout):
    ms = cfg.m or (10, 1000)
    ns = cfg.n or (10, 1000)
    dec = cfg.decomposition or "general-d1"
    t0 = cfg.t0 or DEFAULT_T0[dec]
    rows = experiments.sweep(ms, ns, dec, cfg.seed, t0, cfg.points, cfg.workers)
    lines = [f"# command=sweep", f"# decomposition={dec}", f"# seed={cfg.seed}",
             f"# t0={t0}", f"# points={cfg.points}", "m,n,verdict,final_quarter_max"]
    lines += [f"{m},{n},{v.value},{x!r}" for m, n, v, x in rows]
    text = "\n".join(lines) + "\n"
    if cfg.out:
        with open(cfg.out, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


HANDLERS = {"simulate": cmd_simulate, "figure": cmd_figure, "fit": cmd_fit,
            "oracle-check": cmd_oracle_check, "sweep": cmd_sweep}


def main(argv=None, stdout=None, stderr=None, environ=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg = parse_config(argv, environ)
        return HANDLERS[cfg.command](cfg, stdout)
    except SystemExit as exc:  # argparse
        return int(exc.code or 0)
    except (UsageError, ConfigError) as exc:
        stderr.write(f"spinbath: error: {exc}\n")
        return 2
    except (SpinBathError, OSError) as exc:
        stderr.write(f"spinbath: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
