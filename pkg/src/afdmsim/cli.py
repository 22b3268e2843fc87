"""Command line entry point: ``afdmsim {sweep,trial,selftest}``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import typing
from pathlib import Path

import numpy as np

from afdmsim.config import SystemParams, validate

SWEEP_KEYS = ("snr_db", "pilot_counts", "oversampling_factors", "frames_per_point", "receivers")
DEFAULT_SNR = tuple(np.arange(0.0, 20.0 + 1e-9, 2.5).tolist())


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _add_param_flags(parser: argparse.ArgumentParser) -> None:
    hints = typing.get_type_hints(SystemParams)
    group = parser.add_argument_group("system parameters (override the config file)")
    for f in dataclasses.fields(SystemParams):
        hint = hints[f.name]
        kwargs: dict = {"dest": f"param_{f.name}", "default": None}
        args = typing.get_args(hint)
        if typing.get_origin(hint) is typing.Literal:
            kwargs["choices"] = args
        elif hint is bool:
            kwargs["type"] = _bool
        elif hint is int:
            kwargs["type"] = int
        else:
            # float and float | None
            kwargs["type"] = float
        group.add_argument(f"--{f.name}", metavar=f.name.upper(), **kwargs)


def _params_from_args(args, base: dict) -> SystemParams:
    data = dict(base)
    for f in dataclasses.fields(SystemParams):
        value = getattr(args, f"param_{f.name}")
        if value is not None:
            data[f.name] = value
    try:
        params = SystemParams.from_dict(data)
    except KeyError as exc:
        raise SystemExit(f"config error: {exc.args[0]}") from None
    report = validate(params)
    if not report:
        raise SystemExit("invalid parameters:\n  " + "\n  ".join(report.violations))
    return params


def _load_config(path: str | None) -> tuple[dict, dict]:
    if path is None:
        return {}, {}
    raw = json.loads(Path(path).read_text())
    sweep_part = {k: raw.pop(k) for k in SWEEP_KEYS if k in raw}
    return raw, sweep_part


def cmd_sweep(args) -> int:
    from afdmsim.harness import SweepSpec, sweep

    param_cfg, sweep_cfg = _load_config(args.config)
    params = _params_from_args(args, param_cfg)
    # an explicit N_P narrows the default pilot grid to that one value
    explicit_np = args.param_N_P is not None or "N_P" in param_cfg
    default_pilots = (params.N_P,) if explicit_np else (4, 32)
    spec = SweepSpec(
        snr_db=tuple(args.snr_db or sweep_cfg.get("snr_db", DEFAULT_SNR)),
        pilot_counts=tuple(args.pilot_counts or sweep_cfg.get("pilot_counts", default_pilots)),
        oversampling_factors=tuple(args.oversampling or sweep_cfg.get("oversampling_factors", (1, 2))),
        frames_per_point=args.frames or sweep_cfg.get("frames_per_point", 100),
        receivers=tuple(args.receivers or sweep_cfg.get("receivers", ("pbigabp", "linear_gabp"))),
        output=Path(args.out),
        params=params,
        workers=args.workers,
        record_timing=not args.no_timing,
        json_mirror=args.json,
    )
    result = sweep(spec)
    for row in result.rows:
        ber = "-" if row.ber is None else f"{row.ber:.3e}"
        nm = "-" if row.nmse_db is None else f"{row.nmse_db:.2f} dB"
        print(f"{row.receiver:16s} G={row.G} N_P={row.N_P:3d} SNR={row.snr_db:5.1f}  BER={ber}  NMSE={nm}")
    print(f"wrote {spec.output}")
    return 0


def cmd_trial(args) -> int:
    from afdmsim.harness import trace_trial

    param_cfg, _ = _load_config(args.config)
    params = _params_from_args(args, param_cfg)
    if args.snr_db is not None:
        params = params.with_snr(args.snr_db)
    real, res, metrics = trace_trial(params, params.seed, args.frame_index)
    metrics.update(snr_db=params.snr_db, N_0=params.N_0, G=params.G, N_P=params.N_P)
    print(json.dumps(metrics, indent=2))
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "mean_var_x", "mean_var_h", "ber"])
            w.writerows(res.trace)
    if args.paths:
        real.paths.save(args.paths)
    return 0


def cmd_selftest(args) -> int:
    from afdmsim.selftest import run_all

    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afdmsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sweep", help="Monte Carlo sweep over SNR, pilot count and oversampling")
    sp.add_argument("--config", help="JSON file with SystemParams fields and sweep keys")
    sp.add_argument("--snr-db", type=float, nargs="+")
    sp.add_argument("--pilot-counts", type=int, nargs="+")
    sp.add_argument("--oversampling", type=int, nargs="+")
    sp.add_argument("--frames", type=int)
    sp.add_argument("--receivers", nargs="+", choices=("pbigabp", "linear_gabp", "genie_detection"))
    sp.add_argument("--out", default="sweep.csv")
    sp.add_argument("--json", action="store_true", help="also write a JSON mirror of the rows")
    sp.add_argument("--workers", type=int, help="process count (default: $AFDMSIM_WORKERS or 1)")
    sp.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-stable output")
    _add_param_flags(sp)
    sp.set_defaults(func=cmd_sweep)

    tp = sub.add_parser("trial", help="single seeded trial with a per-iteration trace")
    tp.add_argument("--config")
    tp.add_argument("--snr-db", type=float)
    tp.add_argument("--frame-index", type=int, default=0)
    tp.add_argument("--trace", help="CSV file for the iteration trace")
    tp.add_argument("--paths", help="JSON file for the sampled path set")
    _add_param_flags(tp)
    tp.set_defaults(func=cmd_trial)

    st = sub.add_parser("selftest", help="run the built-in oracle checks")
    st.set_defaults(func=cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
