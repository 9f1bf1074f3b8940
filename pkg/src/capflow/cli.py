"""Batch front end: run flows from config files, validate, inspect.

Commands:
    capflow run <config>                  write <base>.snap and <base>.csv
    capflow validate <suite> [--resolution N]
    capflow inspect <snapshot>

The config file is plain key=value text (blank lines and # comments
ignored).  Required keys: s, theta, dt, resolution, topology.  Optional:
t_end, n, hs_ref_mode, initial, save_every, homotopy_order,
refresh_remainders, picard_tol, max_picard, bc_tol, output.  Angles are
radians.  Outputs carry the full run manifest in their headers and are
byte-identical across reruns of the same config.

Exit codes: 0 ok, 2 config error, 3 nonconvergence, 4 extinction,
5 injectivity failure, 6 I/O error.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field

from . import __version__
from .flow import FlowConfig, run_flow
from .snapshots import (
    SnapshotError,
    frame_record,
    read_snapshot,
    write_csv,
    write_snapshot,
)
from .validation import SUITES, run_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_EXTINCTION = 4
EXIT_INJECTIVITY = 5
EXIT_IO = 6

_STATUS_CODES = {
    "completed": EXIT_OK,
    "nonconvergence": EXIT_NONCONVERGENCE,
    "extinct": EXIT_EXTINCTION,
    "injectivity": EXIT_INJECTIVITY,
}

_FLOAT_KEYS = ("s", "theta", "dt", "t_end", "picard_tol", "bc_tol")
_INT_KEYS = ("resolution", "n", "save_every", "homotopy_order", "max_picard")
_STR_KEYS = ("topology", "hs_ref_mode", "initial", "refresh_remainders")
_REQUIRED = ("s", "theta", "dt", "resolution", "topology")
_ALL_KEYS = _FLOAT_KEYS + _INT_KEYS + _STR_KEYS + ("output",)


class ConfigError(ValueError):
    """A config file is missing, malformed, or out of range."""


@dataclass(frozen=True)
class RunManifest:
    """Self-describing record of one run, embedded in every output header.

    Holds the full config echo, the grid spec, the initial-condition
    spec, a deterministic marker (no seeds exist anywhere), and the
    artifact version.  Round-trips losslessly through to_dict/from_dict.
    """

    config: dict
    grid: dict
    initial: str
    deterministic: bool = True
    version: str = __version__

    @classmethod
    def from_config(cls, cfg: FlowConfig) -> "RunManifest":
        echo = asdict(cfg)
        return cls(
            config=echo,
            grid={
                "n": cfg.n,
                "resolution": cfg.resolution,
                "topology": cfg.topology,
            },
            initial=cfg.initial,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(**d)


def parse_config(path):
    """Parse a key=value config file into (FlowConfig, output base path).

    Unknown keys are rejected by name; value errors name the key and its
    legal range.  The output base defaults to the config path without its
    extension.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, eq, value = stripped.partition("=")
        if not eq:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = key.strip(), value.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r}; legal keys: "
                + ", ".join(sorted(_ALL_KEYS))
            )
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"{path}: missing required keys: {', '.join(missing)}")
    kwargs = {}
    for key, value in raw.items():
        if key == "output":
            continue
        if key in _FLOAT_KEYS:
            try:
                kwargs[key] = float(value)
            except ValueError:
                raise ConfigError(f"{key} must be a number, got {value!r}") from None
        elif key in _INT_KEYS:
            try:
                kwargs[key] = int(value)
            except ValueError:
                raise ConfigError(
                    f"{key} must be an integer, got {value!r}"
                ) from None
        else:
            kwargs[key] = value
    try:
        cfg = FlowConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    base = raw.get("output", os.path.splitext(path)[0])
    return cfg, base


def cmd_run(args):
    cfg, base = parse_config(args.config)
    manifest = RunManifest.from_config(cfg).to_dict()
    traj = run_flow(cfg)
    by_time = {d["t"]: d for d in traj.diagnostics}
    frames = [
        frame_record(t, vals, by_time[t]["max_bc_residual"], by_time[t]["volume"])
        for t, vals in traj.saved
    ]
    write_snapshot(base + ".snap", manifest, frames)
    write_csv(base + ".csv", manifest, traj.diagnostics)
    code = _STATUS_CODES[traj.status]
    note = f" ({traj.message})" if traj.message else ""
    print(
        f"{traj.status}{note}: {len(traj.diagnostics) - 1} steps to "
        f"t={traj.diagnostics[-1]['t']:.6g}, {len(frames)} frames -> "
        f"{base}.snap, {base}.csv"
    )
    return code


def cmd_validate(args):
    if args.suite not in SUITES:
        print(
            f"unknown suite {args.suite!r}; available: "
            + ", ".join(sorted(SUITES)),
            file=sys.stderr,
        )
        return EXIT_CONFIG
    rows = run_suite(args.suite, resolution=args.resolution)
    name_w = max(len(r.name) for r in rows)
    failures = 0
    for r in rows:
        flag = "PASS" if r.passed else "FAIL"
        failures += not r.passed
        print(
            f"{flag}  {r.name:<{name_w}}  measured {r.measured:>12.5g}  "
            f"tolerance {r.tolerance:>8.1g}  [{r.basis}]"
        )
    print(f"{len(rows) - failures}/{len(rows)} checks passed")
    return EXIT_OK if failures == 0 else 1


def cmd_inspect(args):
    manifest, frames = read_snapshot(args.snapshot)
    first, last = frames[0], frames[-1]
    print(f"snapshot {args.snapshot}")
    print(f"  manifest: {json.dumps(manifest, sort_keys=True)}")
    print(f"  frames: {len(frames)}")
    print(f"  time span: {first['time']:.6g} .. {last['time']:.6g}")
    print(
        f"  final field: {len(last['values'])} nodes, "
        f"min {last['min_rho']:.6g}, volume {last['volume']:.6g}, "
        f"boundary residual {last['bc_residual']:.3g}"
    )
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="capflow", description=__doc__.splitlines()[0]
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a flow from a config file")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)
    p_val = sub.add_parser("validate", help="run a named oracle suite")
    p_val.add_argument("suite")
    p_val.add_argument("--resolution", type=int, default=None)
    p_val.set_defaults(func=cmd_validate)
    p_ins = sub.add_parser("inspect", help="summarize a snapshot file")
    p_ins.add_argument("snapshot")
    p_ins.set_defaults(func=cmd_inspect)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SnapshotError as exc:
        print(f"snapshot error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
