"""Monte-Carlo experiment harness.

Three experiment kinds mirror the evaluation scenarios: recon_1d sweeps
reconstruction quality and 1D arrival error over reduction ratios, grid_2d
maps planar positioning error over a floor grid, room_3d scatters random
tags in a room.  Every random draw is keyed by
SeedSequence((master_seed, stream, cell_index, trial)) so cells and trials
are independent work items: any execution order or thread count produces
byte-identical CSV output.
"""

from __future__ import annotations

import concurrent.futures
import csv
import math
import os
import tempfile
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .acquisition import ProjectionMatrix, make_projection, measure
from .arrival import detect_arrival
from .errors import ConfigError, NoPulseError, UwbSimError
from .pipeline import PipelineConfig, PositioningContext
from .recovery import TemplateDictionary, bcs, bp_denoise, cs_uwb, omp, recon_percentage
from .seeding import STREAM_CHANNEL, STREAM_NOISE, STREAM_PHI, STREAM_TAG, seed_for
from .sequential import SequentialConfig, drift_for_scale
from .signal_model import PulseSpec, SignalFrame, generate_channel, preset_profile, synthesize_frame
from .tdoa import AnchorSet

__all__ = [
    "ExperimentSpec",
    "Row",
    "ResultTable",
    "run_recon_1d",
    "run_grid_2d",
    "run_room_3d",
    "run_experiment",
    "export_csv",
    "import_csv",
    "export_gnuplot",
    "PAPER_ANCHORS_3D",
    "DEFAULT_ANCHORS_2D",
]

KINDS = ("recon_1d", "grid_2d", "room_3d")
RECON_ALGS = ("cs_uwb", "bp", "omp", "bcs")
POSITION_ALGS = ("cs_uwb", "sequential")

# four stations in the 5 m x 5 m x 4 m room
PAPER_ANCHORS_3D = np.array(
    [[0.0, 0.0, 170.0], [4000.0, 0.0, 1855.0], [4410.0, 4435.0, 2860.0], [0.0, 4545.0, 3260.0]]
)
# three stations on a 5 m x 5 m floor; their equal-distance point (2500, 1875)
# sits inside the default evaluation grid
DEFAULT_ANCHORS_2D = np.array([[0.0, 0.0], [5000.0, 0.0], [2500.0, 5000.0]])

CSV_HEADER = ("experiment", "algorithm", "R_r", "snr_db", "x_mm", "y_mm", "z_mm", "trial",
              "metric", "value")


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of one experiment run."""

    kind: str
    algorithms: tuple = ()
    rr_grid: tuple = ()
    snr_db: float = 10.0
    trials: int | None = None
    seed: int = 0
    # signal model (n / dt / channel of None pick per-kind defaults)
    n: int | None = None
    dt: float | None = None
    pulse_sigma: float = 150e-12
    channel: str | None = None
    # positioning geometry
    anchors: tuple = ()
    bounds: tuple = ()
    resolution: int = 20
    tags: int = 100
    drift_scale: float = 1.03
    # None: interleave where throughput dominates (dense grids), run the
    # reconstruction to convergence where per-fix accuracy dominates
    interleave: bool | None = None
    # sequential clocks
    f_p: float = 10e6
    f_s: float = 9.999e6
    seq_samples: int = 10_000

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.algorithms:
            default = RECON_ALGS if self.kind == "recon_1d" else POSITION_ALGS
            object.__setattr__(self, "algorithms", default)
        allowed = RECON_ALGS if self.kind == "recon_1d" else POSITION_ALGS
        for a in self.algorithms:
            if a not in allowed:
                raise ConfigError(f"algorithm {a!r} not valid for {self.kind} (allowed: {allowed})")
        if self.n is None:
            # positioning frames must cover the largest anchor-tag flight time
            object.__setattr__(self, "n", {"recon_1d": 1024, "grid_2d": 2560,
                                           "room_3d": 3072}[self.kind])
        if self.dt is None:
            # reconstruction sweeps need a window long enough to hold a
            # many-ray response; positioning needs 3 mm range bins
            object.__setattr__(self, "dt", 40e-12 if self.kind == "recon_1d" else 10e-12)
        if self.channel is None:
            # multipath density stresses reconstruction; positioning assumes a
            # dominant line-of-sight pulse
            object.__setattr__(self, "channel", "dense" if self.kind == "recon_1d" else "single")
        if self.trials is None:
            object.__setattr__(self, "trials", {"recon_1d": 50, "grid_2d": 10,
                                                "room_3d": 1}[self.kind])
        if self.interleave is None:
            object.__setattr__(self, "interleave", self.kind == "grid_2d")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.rr_grid:
            # reconstruction sweeps probe the under-sampled transition;
            # positioning wants extra rows for arrival precision (the
            # arrival-time spread scales as 1/sqrt(M), and solver cost per
            # update is nearly independent of M), with the most headroom at
            # the millimetre-regime room run
            object.__setattr__(self, "rr_grid", {"recon_1d": (0.15,), "grid_2d": (0.25,),
                                                 "room_3d": (0.5,)}[self.kind])
        if any(not 0 < r <= 1 for r in self.rr_grid):
            raise ConfigError("rr_grid values must lie in (0, 1]")
        if self.resolution < 1:
            raise ConfigError("resolution must be positive")
        if self.tags < 1:
            raise ConfigError("tags must be >= 1")
        if not self.anchors:
            default = DEFAULT_ANCHORS_2D if self.kind == "grid_2d" else PAPER_ANCHORS_3D
            object.__setattr__(self, "anchors", tuple(map(tuple, default)))
        if not self.bounds:
            # 3D: the stations mark the room footprint (4410 x 4545 mm); keep
            # tags 500 mm off the walls and below the station plane, away from
            # the dilution blow-up directly under the corner station
            object.__setattr__(
                self,
                "bounds",
                ((500.0, 4500.0), (500.0, 4500.0)) if self.kind == "grid_2d"
                else ((500.0, 3910.0), (500.0, 4045.0), (500.0, 2500.0)),
            )
        if self.kind != "recon_1d" and len(self.rr_grid) != 1:
            raise ConfigError("positioning experiments take a single R_r value")

    @property
    def pulse(self) -> PulseSpec:
        return PulseSpec(sigma=self.pulse_sigma)

    def anchor_set(self) -> AnchorSet:
        return AnchorSet(np.asarray(self.anchors, dtype=float))


@dataclass(frozen=True)
class Row:
    """One measurement: position columns stay None for recon_1d rows."""

    experiment: str
    algorithm: str
    r_r: float
    snr_db: float
    x_mm: float | None
    y_mm: float | None
    z_mm: float | None
    trial: int
    metric: str
    value: float


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def filter(self, **keys) -> "ResultTable":
        out = [r for r in self.rows if all(getattr(r, k) == v for k, v in keys.items())]
        return ResultTable(out)

    def values(self, metric: str, **keys) -> np.ndarray:
        return np.asarray([r.value for r in self.filter(metric=metric, **keys).rows])

    def median(self, metric: str, **keys) -> float:
        vals = self.values(metric, **keys)
        if vals.size == 0:
            raise ValueError(f"no rows match metric={metric!r} {keys}")
        return float(np.median(vals))

    def cell_stat(self, metric: str, stat=np.median, **keys) -> dict:
        """(x_mm, y_mm, z_mm) -> stat over trials, for positioning tables."""
        groups: dict = {}
        for r in self.filter(metric=metric, **keys).rows:
            groups.setdefault((r.x_mm, r.y_mm, r.z_mm), []).append(r.value)
        return {k: float(stat(np.asarray(v))) for k, v in groups.items()}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def _atomic_write(path, text: str) -> None:
    """Write via a temp file + rename so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".uwbsim-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export_csv(table: ResultTable, path) -> None:
    """Fixed-schema CSV: shortest round-trip floats, UTF-8, LF endings."""
    if not table.rows:
        raise ValueError("refusing to export an empty table")
    lines = [",".join(CSV_HEADER)]
    for r in table.rows:
        lines.append(",".join([
            r.experiment, r.algorithm, _fmt(r.r_r), _fmt(r.snr_db), _fmt(r.x_mm),
            _fmt(r.y_mm), _fmt(r.z_mm), str(r.trial), r.metric, _fmt(r.value),
        ]))
    _atomic_write(path, "\n".join(lines) + "\n")


def import_csv(path) -> ResultTable:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        for rec in reader:
            if not rec:
                continue
            rows.append(Row(
                experiment=rec[0], algorithm=rec[1], r_r=float(rec[2]), snr_db=float(rec[3]),
                x_mm=float(rec[4]) if rec[4] else None,
                y_mm=float(rec[5]) if rec[5] else None,
                z_mm=float(rec[6]) if rec[6] else None,
                trial=int(rec[7]), metric=rec[8], value=float(rec[9]),
            ))
    return ResultTable(rows)


def export_gnuplot(table: ResultTable, path, algorithm: str, metric: str = "error_mm",
                   stat=np.median) -> None:
    """Write a 2D map as a gnuplot nonuniform matrix (rows x cols = grid)."""
    cells = table.cell_stat(metric, stat=stat, algorithm=algorithm)
    if not cells:
        raise ValueError(f"no cells for algorithm={algorithm!r} metric={metric!r}")
    xs = sorted({k[0] for k in cells})
    ys = sorted({k[1] for k in cells})
    lines = [f"# {metric} map for {algorithm}: rows = y (mm), cols = x (mm)"]
    lines.append(" ".join([_fmt(float(len(xs)))] + [_fmt(x) for x in xs]))
    for y in ys:
        vals = [cells.get((x, y, None), math.nan) for x in xs]
        lines.append(" ".join([_fmt(y)] + [_fmt(v) for v in vals]))
    _atomic_write(path, "\n".join(lines) + "\n")


# -- recon_1d ---------------------------------------------------------------


def _recon_trial(spec: ExperimentSpec, trial: int, dictionary: TemplateDictionary):
    """One Monte-Carlo instance, swept over the R_r grid with nested rows.

    All algorithms and reduction ratios see the same channel, noise draw and
    master projection matrix (lower R_r keeps the leading rows), so per-trial
    comparisons across R_r are paired: extra measurements extend, never
    replace, the information available.
    """
    pulse = spec.pulse
    profile = preset_profile(spec.channel)
    channel = generate_channel(profile, seed_for(spec.seed, STREAM_CHANNEL, trial))
    # arrivals are not grid-aligned in the field; dither the whole response
    # by a sub-bin offset per trial
    offset = np.random.default_rng(seed_for(spec.seed, STREAM_CHANNEL, trial, 1)).uniform(0.0, spec.dt)
    channel = channel.shifted(offset)
    frame = synthesize_frame(channel, pulse, spec.n, spec.dt, out_of_window="clip")
    t_true = detect_arrival(frame).time
    m_master = max(1, int(round(max(spec.rr_grid) * spec.n)))
    master = make_projection(m_master, spec.n, "gaussian", seed_for(spec.seed, STREAM_PHI, trial))
    noise_seed = seed_for(spec.seed, STREAM_NOISE, trial)

    rows = []
    for rr in spec.rr_grid:
        m = max(1, int(round(rr * spec.n)))
        phi = ProjectionMatrix(master.entries[:m], kind=master.kind)
        meas = measure(phi, frame, spec.snr_db, rng_seed=noise_seed)
        beta = max(meas.beta, 1e-4 * float(np.sqrt(np.mean(meas.y**2))))
        for alg in spec.algorithms:
            if alg == "cs_uwb":
                res = cs_uwb([meas.y], [phi.entries], dictionary, beta)[0]
            elif alg == "bp":
                res = bp_denoise(meas.y, phi.entries)
            elif alg == "omp":
                res = omp(meas.y, phi.entries, residual_tol=beta * np.sqrt(m))
            else:
                res, _ = bcs(meas.y, phi.entries, beta)
            p_re = recon_percentage(frame.samples, res.s_hat)
            try:
                t_est = detect_arrival(SignalFrame(res.s_hat, spec.dt)).time
                err_bins = abs(t_est - t_true) / spec.dt
            except NoPulseError:
                err_bins = float(spec.n)  # nothing detectable: worst representable offset
            common = dict(experiment="recon_1d", algorithm=alg, r_r=rr, snr_db=spec.snr_db,
                          x_mm=None, y_mm=None, z_mm=None, trial=trial)
            rows.append(Row(metric="p_re", value=float(p_re), **common))
            rows.append(Row(metric="arrival_err_bins", value=float(err_bins), **common))
    return rows


def run_recon_1d(spec: ExperimentSpec, threads: int = 1) -> ResultTable:
    """Reconstruction-quality sweep: P_re and arrival error per (algorithm, R_r, trial)."""
    if spec.kind != "recon_1d":
        raise ConfigError(f"run_recon_1d needs kind=recon_1d, got {spec.kind}")
    dictionary = TemplateDictionary.from_pulse(spec.pulse, spec.n, spec.dt)
    results = _parallel_map(
        lambda trial: _recon_trial(spec, trial, dictionary), list(range(spec.trials)), threads
    )
    return ResultTable([row for chunk in results for row in chunk])


# -- positioning ------------------------------------------------------------


def _pipeline_config(spec: ExperimentSpec, mode: str) -> PipelineConfig:
    seq = SequentialConfig(
        f_p=spec.f_p, f_s=spec.f_s,
        delta_f=drift_for_scale(spec.f_p, spec.f_s, spec.drift_scale),
        n_samples=spec.seq_samples,
    )
    return PipelineConfig(
        mode=mode,
        interleave=spec.interleave and mode == "cs_uwb",
        n=spec.n, dt=spec.dt, pulse=spec.pulse,
        reduction_ratio=spec.rr_grid[0],
        n1_snr_db=spec.snr_db,
        sequential=seq,
        channel_profile=preset_profile(spec.channel),
        seed=spec.seed,
        solve_bounds=spec.bounds,
    )


def _position_rows(spec: ExperimentSpec, mode: str, ctx: PositioningContext,
                   tag: np.ndarray, cell_index: int, trial: int) -> list:
    profile = preset_profile(spec.channel)
    channels = [
        generate_channel(profile, seed_for(spec.seed, STREAM_CHANNEL, cell_index, trial, s))
        for s in range(ctx.anchors.count)
    ]
    x, y = float(tag[0]), float(tag[1])
    z = float(tag[2]) if tag.size == 3 else None
    common = dict(experiment=spec.kind, algorithm=mode, r_r=spec.rr_grid[0],
                  snr_db=spec.snr_db, x_mm=x, y_mm=y, z_mm=z, trial=trial)
    try:
        outcome = ctx.locate(tag, channels, trial=cell_index * spec.trials + trial)
        value = outcome.error_mm if outcome.estimate.converged else float("inf")
    except (NoPulseError, UwbSimError, ValueError):
        value = float("inf")
    return [Row(metric="error_mm", value=value, **common)]


def _grid_points(spec: ExperimentSpec) -> list:
    (x0, x1), (y0, y1) = spec.bounds[0], spec.bounds[1]
    xs = np.linspace(x0, x1, spec.resolution)
    ys = np.linspace(y0, y1, spec.resolution)
    return [np.array([x, y]) for y in ys for x in xs]


def run_grid_2d(spec: ExperimentSpec, threads: int = 1) -> ResultTable:
    """Planar error map: locate a tag at every grid cell, both modes."""
    if spec.kind != "grid_2d":
        raise ConfigError(f"run_grid_2d needs kind=grid_2d, got {spec.kind}")
    anchors = spec.anchor_set()
    if anchors.dim != 2:
        raise ConfigError("grid_2d needs 2D anchors")
    points = _grid_points(spec)
    rows = []
    for mode in spec.algorithms:
        ctx = PositioningContext(anchors, _pipeline_config(spec, mode))
        tasks = [(c, t) for c in range(len(points)) for t in range(spec.trials)]
        results = _parallel_map(
            lambda args: _position_rows(spec, mode, ctx, points[args[0]], args[0], args[1]),
            tasks, threads,
        )
        rows.extend(row for chunk in results for row in chunk)
    return ResultTable(rows)


def run_room_3d(spec: ExperimentSpec, threads: int = 1) -> ResultTable:
    """Random in-room tags, 3D error per (mode, tag, trial)."""
    if spec.kind != "room_3d":
        raise ConfigError(f"run_room_3d needs kind=room_3d, got {spec.kind}")
    anchors = spec.anchor_set()
    if anchors.dim != 3:
        raise ConfigError("room_3d needs 3D anchors")
    lo = np.array([b[0] for b in spec.bounds])
    hi = np.array([b[1] for b in spec.bounds])
    rng = np.random.default_rng(seed_for(spec.seed, STREAM_TAG))
    points = [lo + (hi - lo) * rng.uniform(size=3) for _ in range(spec.tags)]
    rows = []
    for mode in spec.algorithms:
        ctx = PositioningContext(anchors, _pipeline_config(spec, mode))
        tasks = [(c, t) for c in range(len(points)) for t in range(spec.trials)]
        results = _parallel_map(
            lambda args: _position_rows(spec, mode, ctx, points[args[0]], args[0], args[1]),
            tasks, threads,
        )
        rows.extend(row for chunk in results for row in chunk)
    return ResultTable(rows)


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> ResultTable:
    runner = {"recon_1d": run_recon_1d, "grid_2d": run_grid_2d, "room_3d": run_room_3d}[spec.kind]
    return runner(spec, threads)


def _parallel_map(fn, tasks, threads: int):
    """Ordered map over independent tasks; threads=0 uses all cores."""
    if threads == 0:
        threads = os.cpu_count() or 1
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))
