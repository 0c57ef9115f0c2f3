"""Noise-parameter sweeps with deterministic CSV and JSON reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..elements import NoiseParams
from ..errors import DomainError
from ..state import random_unit_vector
from .outcomes import run_protocol

THREADS_ENV = "TIMEBINSIM_THREADS"


@dataclass(frozen=True)
class SweepConfig:
    """``draws`` random points, or a regular ``grid`` of steps per angle.

    Noise is parameterized as gamma = cos(chi), eta = sin(chi) e^{i phi}
    with theta, chi, phi uniform.  ``collective`` uses one draw for every
    channel; otherwise each channel gets its own.  ``random_inputs`` also
    draws the input coefficients for each point.
    """

    draws: int = 100
    seed: int = 0
    grid: int | None = None
    collective: bool = False
    random_inputs: bool = False

    def __post_init__(self):
        if self.draws < 0:
            raise DomainError("draws must be >= 0")
        if self.grid is not None and self.grid < 1:
            raise DomainError("grid needs at least one step per angle")


@dataclass(frozen=True)
class SweepPoint:
    index: int
    params: dict  # column -> real value, in column order
    noise: dict  # ChannelKey -> NoiseParams
    state: object = None


@dataclass
class SweepReport:
    param_columns: list
    port_columns: list
    rows: list  # dicts keyed by column

    @property
    def columns(self) -> list:
        return ["index", *self.param_columns, "total_success", "min_fidelity", "max_fidelity", *self.port_columns]

    def success(self) -> np.ndarray:
        return np.array([r["total_success"] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "columns": self.columns,
            "rows": [
                {
                    "index": r["index"],
                    "params": {c: _num(r[c]) for c in self.param_columns},
                    "total_success": _num(r["total_success"]),
                    "min_fidelity": _num(r["min_fidelity"]),
                    "max_fidelity": _num(r["max_fidelity"]),
                    "ports": {c: _num(r[c]) for c in self.port_columns},
                }
                for r in self.rows
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def _num(x):
    # round-trips through float() yet prints with a fixed 17-digit format
    return None if x is None else float(format(float(x), ".17g"))


def _channel_angles(rng, cfg: SweepConfig, keys) -> list:
    if cfg.collective:
        a = tuple(rng.uniform(0, 2 * math.pi) if i != 1 else rng.uniform(0, math.pi / 2) for i in range(3))
        return [a] * len(keys)
    return [
        (rng.uniform(0, 2 * math.pi), rng.uniform(0, math.pi / 2), rng.uniform(0, 2 * math.pi)) for _ in keys
    ]


def sweep_points(protocol, cfg: SweepConfig) -> list[SweepPoint]:
    """Grid points in emission order; pure given ``cfg``."""
    keys = sorted(protocol.channels)
    points = []
    if cfg.grid is not None:
        steps = cfg.grid
        thetas = [2 * math.pi * i / steps for i in range(steps)]
        chis = [math.pi / 2 * i / max(steps - 1, 1) for i in range(steps)]
        phis = [2 * math.pi * i / steps for i in range(steps)]
        idx = 0
        for th in thetas:
            for chi in chis:
                for phi in phis:
                    nz = NoiseParams.from_angles(th, chi, phi)
                    points.append(
                        SweepPoint(idx, {"theta": th, "chi": chi, "phi": phi}, {k: nz for k in keys})
                    )
                    idx += 1
        return points
    rng = np.random.default_rng(cfg.seed)
    for idx in range(cfg.draws):
        angles = _channel_angles(rng, cfg, keys)
        noise = {k: NoiseParams.from_angles(*a) for k, a in zip(keys, angles)}
        if cfg.collective:
            params = dict(zip(("theta", "chi", "phi"), angles[0]))
        else:
            params = {}
            for k, (th, chi, phi) in zip(keys, angles):
                tag = str(k)
                params.update({f"theta.{tag}": th, f"chi.{tag}": chi, f"phi.{tag}": phi})
        state = None
        if cfg.random_inputs:
            pol, sp = random_unit_vector(rng, 2), random_unit_vector(rng, 2)
            params.update(
                {
                    "alpha.re": pol[0].real, "alpha.im": pol[0].imag,
                    "beta.re": pol[1].real, "beta.im": pol[1].imag,
                    "alpha_p.re": sp[0].real, "alpha_p.im": sp[0].imag,
                    "beta_p.re": sp[1].real, "beta_p.im": sp[1].imag,
                }
            )
            state = protocol.state_for(pol[0], pol[1], sp[0], sp[1])
        points.append(SweepPoint(idx, params, noise, state))
    return points


def thread_count(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise DomainError(f"{THREADS_ENV} must be >= 1")
    return n


def run_sweep(protocol, cfg: SweepConfig, *, threads: int | None = None) -> SweepReport:
    """Evaluate every sweep point; rows come back in grid order whatever the
    completion order of worker threads."""
    points = sweep_points(protocol, cfg)

    def evaluate(pt: SweepPoint):
        return pt, run_protocol(protocol, pt.noise, state=pt.state)

    n_threads = thread_count() if threads is None else threads
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(evaluate, points))
    else:
        results = [evaluate(p) for p in points]

    port_cols = sorted({r.port_label for _, t in results for r in t.rows})
    rows = []
    for pt, table in results:
        fids = [r.fidelity for r in table.rows]
        row = {"index": pt.index, **pt.params}
        row["total_success"] = table.success
        row["min_fidelity"] = min(fids) if fids else None
        row["max_fidelity"] = max(fids) if fids else None
        per = {r.port_label: r.probability for r in table.rows}
        for c in port_cols:
            row[c] = per.get(c, 0.0)
        rows.append(row)
    param_cols = list(points[0].params) if points else []
    return SweepReport(param_cols, port_cols, rows)
