"""Monte Carlo trials and parameter sweeps with CSV persistence."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from afdmsim import baselines, pbigabp
from afdmsim.config import SystemParams, trial_seed, validate
from afdmsim.frame import hard_decide, qpsk_demap
from afdmsim.link import simulate_link

log = logging.getLogger(__name__)

RECEIVERS = ("pbigabp", "linear_gabp", "genie_detection")
CSV_FIELDS = (
    "receiver", "G", "N", "N_P", "snr_db", "frames", "bit_errors",
    "bits_total", "ber", "nmse_db", "aborts", "wall_ms",
)
WORKERS_ENV = "AFDMSIM_WORKERS"


def nmse(h_est, h_true) -> float:
    h_true = np.asarray(h_true)
    ref = float(np.sum(np.abs(h_true) ** 2))
    if ref == 0.0:
        raise ValueError("NMSE undefined for an all-zero channel")
    return float(np.sum(np.abs(np.asarray(h_est) - h_true) ** 2)) / ref


@dataclass(frozen=True)
class TrialMetrics:
    receiver: str
    G: int
    bit_errors: int
    bits_total: int
    nmse: float | None
    aborted: bool = False
    wall_s: float = 0.0


def run_trial(
    params: SystemParams,
    seed: np.random.SeedSequence,
    receivers: Sequence[str] = ("pbigabp",),
    oversampling: Sequence[int] | None = None,
) -> list[TrialMetrics]:
    """One frame through every requested receiver and oversampling factor.

    All receivers see the same paths, bits and noise; a receiver using ``G``
    streams gets the first ``G`` streams of a realization drawn at the largest
    requested factor.
    """
    oversampling = tuple(oversampling or (params.G,))
    params = params.replace(G=max(oversampling))
    validate(params).raise_if_failed()
    real = simulate_link(params, seed)
    frame, gains = real.frame, real.paths.gains
    n_bits = frame.data_bits.size
    out: list[TrialMetrics] = []
    for G in oversampling:
        y, dictionary, p = real.streams(G)
        genie_errors = None  # shared by the two genie receivers
        for receiver in receivers:
            t0 = time.perf_counter()
            try:
                if receiver == "pbigabp":
                    res = pbigabp.run(y, dictionary, frame, p)
                    errors = int(np.count_nonzero(hard_decide(res.x_d) != frame.data_bits))
                    err_ch = nmse(res.h_est, gains)
                elif receiver in ("linear_gabp", "genie_detection"):
                    if genie_errors is None:
                        x_d = baselines.gabp_detect_known_channel(
                            y, dictionary.effective(gains), frame, p
                        )
                        genie_errors = int(np.count_nonzero(qpsk_demap(x_d) != frame.data_bits))
                    errors, err_ch = genie_errors, None
                    if receiver == "linear_gabp":
                        h = baselines.gabp_estimate_known_data(y, dictionary, frame.x, p)
                        err_ch = nmse(h, gains)
                else:
                    raise ValueError(f"unknown receiver {receiver!r}")
                out.append(
                    TrialMetrics(receiver, G, errors, n_bits, err_ch, False, time.perf_counter() - t0)
                )
            except (pbigabp.MessagePassingError, FloatingPointError) as exc:
                log.warning("trial aborted (%s, G=%d): %s", receiver, G, exc)
                out.append(TrialMetrics(receiver, G, 0, 0, None, True, time.perf_counter() - t0))
    return out


@dataclass(frozen=True)
class SimRow:
    receiver: str
    G: int
    N: int
    N_P: int
    snr_db: float
    frames: int
    bit_errors: int
    bits_total: int
    ber: float | None
    nmse_db: float | None
    aborts: int
    wall_ms: float

    def to_csv(self) -> dict[str, str]:
        d = dataclasses.asdict(self)
        return {k: "" if v is None else repr(v) if isinstance(v, float) else str(v) for k, v in d.items()}

    @classmethod
    def from_csv(cls, rec: dict[str, str]) -> "SimRow":
        def opt(v: str) -> float | None:
            return None if v == "" else float(v)

        return cls(
            receiver=rec["receiver"],
            G=int(rec["G"]),
            N=int(rec["N"]),
            N_P=int(rec["N_P"]),
            snr_db=float(rec["snr_db"]),
            frames=int(rec["frames"]),
            bit_errors=int(rec["bit_errors"]),
            bits_total=int(rec["bits_total"]),
            ber=opt(rec["ber"]),
            nmse_db=opt(rec["nmse_db"]),
            aborts=int(rec["aborts"]),
            wall_ms=float(rec["wall_ms"]),
        )


@dataclass
class SimResult:
    rows: list[SimRow] = field(default_factory=list)
    # per-point per-frame metrics, kept in memory only
    trials: dict[tuple, list[list[TrialMetrics]]] = field(default_factory=dict, compare=False)

    def row(self, receiver: str, G: int, N_P: int, snr_db: float) -> SimRow:
        for r in self.rows:
            if (r.receiver, r.G, r.N_P) == (receiver, G, N_P) and math.isclose(r.snr_db, snr_db):
                return r
        raise KeyError((receiver, G, N_P, snr_db))

    def trial_metrics(self, receiver: str, G: int, N_P: int, snr_db: float) -> list[TrialMetrics]:
        for (n_p, snr), frames in self.trials.items():
            if n_p == N_P and math.isclose(snr, snr_db):
                return [m for per_frame in frames for m in per_frame if (m.receiver, m.G) == (receiver, G)]
        raise KeyError((N_P, snr_db))


def aggregate(
    metrics: Iterable[TrialMetrics], receiver: str, G: int, params: SystemParams,
    snr_db: float, frames: int, record_timing: bool = True,
) -> SimRow:
    """Pool frames: BER is total errors over total bits, NMSE the mean per-frame NMSE."""
    ms = [m for m in metrics if m.receiver == receiver and m.G == G]
    ok = [m for m in ms if not m.aborted]
    errors = sum(m.bit_errors for m in ok)
    bits = sum(m.bits_total for m in ok)
    nm = [m.nmse for m in ok if m.nmse is not None]
    return SimRow(
        receiver=receiver,
        G=G,
        N=params.N,
        N_P=params.N_P,
        snr_db=float(snr_db),
        frames=frames,
        bit_errors=errors,
        bits_total=bits,
        ber=errors / bits if bits else None,
        nmse_db=10.0 * math.log10(math.fsum(nm) / len(nm)) if nm and math.fsum(nm) > 0 else None,
        aborts=sum(m.aborted for m in ms),
        wall_ms=round(1e3 * sum(m.wall_s for m in ms), 3) if record_timing else 0.0,
    )


@dataclass(frozen=True)
class SweepSpec:
    snr_db: tuple[float, ...]
    pilot_counts: tuple[int, ...]
    oversampling_factors: tuple[int, ...]
    frames_per_point: int
    receivers: tuple[str, ...] = ("pbigabp",)
    output: Path | None = None
    params: SystemParams = field(default_factory=SystemParams)
    workers: int | None = None
    record_timing: bool = True
    json_mirror: bool = False

    def __post_init__(self) -> None:
        for name in ("snr_db", "pilot_counts", "oversampling_factors", "receivers"):
            value = tuple(getattr(self, name))
            if not value:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, value)
        if self.frames_per_point < 1:
            raise ValueError("frames_per_point must be >= 1")
        unknown = set(self.receivers) - set(RECEIVERS)
        if unknown:
            raise ValueError(f"unknown receiver(s): {sorted(unknown)}")
        if self.output is not None:
            object.__setattr__(self, "output", Path(self.output))

    def points(self) -> list[tuple[int, int, float]]:
        """``(point_index, N_P, snr_db)`` in execution order."""
        return [(i, n_p, float(s)) for i, (n_p, s) in enumerate(product(self.pilot_counts, self.snr_db))]

    def settings(self) -> dict:
        """Everything that determines the numbers in the output."""
        return {
            "snr_db": list(self.snr_db),
            "pilot_counts": list(self.pilot_counts),
            "oversampling_factors": list(self.oversampling_factors),
            "frames_per_point": self.frames_per_point,
            "receivers": list(self.receivers),
            "params": self.params.to_dict(),
            "record_timing": self.record_timing,
        }

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.settings(), sort_keys=True).encode()).hexdigest()


def _trial_job(job) -> list[TrialMetrics]:
    params, seed, receivers, oversampling = job
    with threadpool_limits(1):
        return run_trial(params, seed, receivers, oversampling)


def _worker_count(spec: SweepSpec) -> int:
    if spec.workers is not None:
        return max(1, spec.workers)
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _manifest_path(output: Path) -> Path:
    return output.with_name(output.name + ".manifest.json")


def write_csv(rows: Iterable[SimRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.to_csv())


def read_csv(path: str | Path) -> list[SimRow]:
    with open(path, newline="") as fh:
        return [SimRow.from_csv(rec) for rec in csv.DictReader(fh)]


def _frames_path(output: Path) -> Path:
    return output.with_name(output.name + ".frames.jsonl")


def _load_frames(path: Path, completed: set[int]) -> dict[int, list[list[TrialMetrics]]]:
    per_point: dict[int, list[list[TrialMetrics]]] = {}
    if not path.exists():
        return per_point
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            if rec["point"] in completed:
                per_point.setdefault(rec["point"], []).append(
                    [TrialMetrics(**m) for m in rec["metrics"]]
                )
    return per_point


def _load_resume(spec: SweepSpec) -> tuple[list[SimRow], set[int]]:
    out = spec.output
    manifest = _manifest_path(out)
    if not (out.exists() and manifest.exists()):
        return [], set()
    info = json.loads(manifest.read_text())
    if info.get("fingerprint") != spec.fingerprint():
        log.warning("sweep settings changed; ignoring previous results in %s", out)
        return [], set()
    return read_csv(out), set(info.get("completed", []))


def sweep(spec: SweepSpec) -> SimResult:
    """Run every ``(N_P, SNR)`` point of ``spec``.

    Frame ``k`` of point ``i`` always uses seed ``(master, i, k)`` and results
    are pooled in frame order, so the output does not depend on the worker
    count. With ``spec.output`` set, rows are appended to the CSV after each
    point, per-frame metrics go to a ``.frames.jsonl`` sidecar and a manifest
    records finished points so an interrupted sweep can resume with its
    per-frame data intact.
    """
    base = spec.params
    G_max = max(spec.oversampling_factors)
    result = SimResult()
    completed: set[int] = set()
    if spec.output is not None:
        result.rows, completed = _load_resume(spec)
        frames = _load_frames(_frames_path(spec.output), completed)
        done_keys = set()
        for index, n_p, snr in spec.points():
            if index in completed:
                done_keys.add((n_p, snr))
                if index in frames:
                    result.trials[(n_p, snr)] = frames[index]
        if completed:
            # drop anything a killed run wrote for an unfinished point
            result.rows = [r for r in result.rows if (r.N_P, r.snr_db) in done_keys]
            write_csv(result.rows, spec.output)
            _rewrite_frames(_frames_path(spec.output), frames)
        else:
            result.rows = []
            write_csv([], spec.output)
            _frames_path(spec.output).write_text("")
            _manifest_path(spec.output).write_text(
                json.dumps(
                    {"fingerprint": spec.fingerprint(), "settings": spec.settings(), "completed": []},
                    indent=1,
                )
            )

    workers = _worker_count(spec)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for index, n_p, snr in spec.points():
            if index in completed:
                continue
            params = base.replace(N_P=n_p, G=G_max).with_snr(snr)
            validate(params).raise_if_failed()
            jobs = [
                (params, trial_seed(base.seed, index, k), spec.receivers, spec.oversampling_factors)
                for k in range(spec.frames_per_point)
            ]
            if pool is None:
                per_frame = [_trial_job(j) for j in jobs]
            else:
                chunk = max(1, len(jobs) // (4 * workers))
                per_frame = list(pool.map(_trial_job, jobs, chunksize=chunk))
            result.trials[(n_p, snr)] = per_frame
            flat = [m for frame in per_frame for m in frame]
            rows = [
                aggregate(flat, rx, G, params, snr, spec.frames_per_point, spec.record_timing)
                for rx in spec.receivers
                for G in spec.oversampling_factors
            ]
            result.rows.extend(rows)
            if spec.output is not None:
                _append_point(spec, rows, index, per_frame)
            log.info("point %d (N_P=%d, SNR=%g dB) done", index, n_p, snr)
    finally:
        if pool is not None:
            pool.shutdown()
    if spec.output is not None and spec.json_mirror:
        mirror = spec.output.with_suffix(".json")
        mirror.write_text(json.dumps([dataclasses.asdict(r) for r in result.rows], indent=1))
    return result


def _frame_lines(index: int, per_frame: list[list[TrialMetrics]]) -> str:
    return "".join(
        json.dumps({"point": index, "frame": k, "metrics": [dataclasses.asdict(m) for m in ms]}) + "\n"
        for k, ms in enumerate(per_frame)
    )


def _rewrite_frames(path: Path, per_point: dict[int, list[list[TrialMetrics]]]) -> None:
    path.write_text("".join(_frame_lines(i, per_point[i]) for i in sorted(per_point)))


def _append_point(
    spec: SweepSpec, rows: list[SimRow], index: int, per_frame: list[list[TrialMetrics]]
) -> None:
    # per-frame metrics first: a point counts as done only once the manifest says so
    with open(_frames_path(spec.output), "a") as fh:
        fh.write(_frame_lines(index, per_frame))
    with open(spec.output, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        for r in rows:
            w.writerow(r.to_csv())
    manifest = _manifest_path(spec.output)
    info = json.loads(manifest.read_text())
    info["completed"] = sorted(set(info["completed"]) | {index})
    manifest.write_text(json.dumps(info, indent=1))


def trace_trial(params: SystemParams, seed: int, frame_index: int = 0):
    """Single PBiGaBP trial with a per-iteration trace.

    Returns ``(realization, output, metrics)``; ``output.trace`` rows are
    ``(iteration, mean var_x, mean var_h, BER)``.
    """
    validate(params).raise_if_failed()
    real = simulate_link(params, trial_seed(seed, 0, frame_index))
    res = pbigabp.run(real.y, real.dictionary, real.frame, params, truth_bits=real.frame.data_bits)
    errors = int(np.count_nonzero(hard_decide(res.x_d) != real.frame.data_bits))
    metrics = {
        "bit_errors": errors,
        "bits_total": int(real.frame.data_bits.size),
        "nmse": nmse(res.h_est, real.paths.gains),
    }
    return real, res, metrics
