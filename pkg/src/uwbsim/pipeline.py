"""End-to-end localization: acquisition, reconstruction, arrival detection, TDOA.

A PositioningContext pins everything that stays fixed while a tag moves:
anchor geometry, per-station projection matrices (hardware does not redraw
its sensing matrix per pulse), the template dictionary and its precomputed
products.  locate() then simulates one fix: inject the line-of-sight delay
into each station's channel, acquire per the configured mode, reconstruct,
detect arrivals, and solve TDOA.

In interleaved mode (cs_uwb only) every accepted reconstruction update
re-detects arrivals and refreshes a warm-started TDOA solve; reconstruction
stops as soon as each station's arrival moved less than epsilon between
consecutive iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import make_projection, measure
from .arrival import detect_arrival
from .errors import ConfigError, NoPulseError, UwbSimError
from .recovery import CsUwbSolver, TemplateDictionary, bcs, bp_denoise, omp
from .seeding import STREAM_CHANNEL, STREAM_NOISE, STREAM_PHI, seed_for
from .sequential import SequentialConfig, acquire_sequential, estimate_arrival_sequential, extension_scale
from .signal_model import ChannelProfile, ChannelRealization, PulseSpec, SignalFrame, generate_channel, synthesize_frame
from .tdoa import (
    AnchorSet,
    C_MM_PER_S,
    PositionEstimate,
    TdoaProblem,
    solve_tdoa,
    solve_tdoa_bounded,
)

__all__ = ["PipelineConfig", "PositioningContext", "StationDiagnostics", "LocateOutcome",
           "locate_once", "locate_track", "MODES"]

MODES = ("cs_uwb", "omp", "bp", "bcs", "sequential")
_CS_MODES = ("cs_uwb", "omp", "bp", "bcs")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one positioning run depends on.

    epsilon is the interleaved-arrival convergence threshold in seconds
    (None = dt/30).  n1_snr_db is the signal-domain SNR used by both
    acquisition paths; n2_snr_db adds measurement-domain noise on the CS
    path only.  beta_floor_rel keeps the BCS noise scale positive on
    noiseless runs (floor relative to the measurement RMS).
    """

    mode: str = "cs_uwb"
    interleave: bool = False
    epsilon: float | None = None
    # frame grid and pulse
    n: int = 1024
    dt: float = 10e-12
    pulse: PulseSpec = field(default_factory=PulseSpec)
    # CS acquisition
    reduction_ratio: float = 0.25
    matrix_kind: str = "gaussian"
    n1_snr_db: float = np.inf
    n2_snr_db: float = np.inf
    beta_floor_rel: float = 1e-4
    # sequential acquisition
    sequential: SequentialConfig = field(default_factory=SequentialConfig)
    # channel generation (locate_track and the harness)
    channel_profile: ChannelProfile = field(default_factory=ChannelProfile)
    # TDOA; solve_bounds (per-axis (low, high) mm, empty = unbounded) names the
    # service region so solves can restart past out-of-region mirror roots
    c: float = C_MM_PER_S
    err_threshold_mm: float = 1e-6
    max_tdoa_iters: int = 100
    solve_bounds: tuple = ()
    # recovery
    max_recon_iters: int = 1000
    mode_params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.interleave and self.mode != "cs_uwb":
            raise ConfigError("interleave requires mode=cs_uwb (the iterative engine)")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not 0 < self.reduction_ratio <= 1:
            raise ConfigError("reduction_ratio must be in (0, 1]")
        if self.n < 1 or not self.dt > 0:
            raise ConfigError("need n >= 1 and dt > 0")
        object.__setattr__(
            self, "solve_bounds", tuple(tuple(map(float, b)) for b in self.solve_bounds)
        )
        if any(len(b) != 2 or not b[0] < b[1] for b in self.solve_bounds):
            raise ConfigError("solve_bounds must be (low, high) pairs with low < high")

    @property
    def epsilon_s(self) -> float:
        return self.dt / 30.0 if self.epsilon is None else self.epsilon

    @property
    def m(self) -> int:
        return max(1, int(round(self.reduction_ratio * self.n)))


@dataclass(frozen=True)
class StationDiagnostics:
    index: int
    arrival_time: float
    true_los_time: float
    recon_iterations: int
    recon_converged: bool


@dataclass(frozen=True)
class LocateOutcome:
    """Position estimate plus truth-referenced error and per-station detail."""

    estimate: PositionEstimate
    error_mm: float
    stations: tuple
    arrival_traces: tuple | None = None
    stopped_by_arrivals: bool = False


class PositioningContext:
    """Fixed per-experiment state, shareable read-only across threads."""

    def __init__(self, anchors: AnchorSet, cfg: PipelineConfig):
        anchors.rank_check()
        if cfg.solve_bounds and len(cfg.solve_bounds) != anchors.dim:
            raise ConfigError(
                f"solve_bounds has {len(cfg.solve_bounds)} axes but anchors are "
                f"{anchors.dim}-dimensional"
            )
        self.anchors = anchors
        self.cfg = cfg
        self.phis = None
        self.dictionary = None
        self.solver = None
        if cfg.mode in _CS_MODES:
            self.phis = [
                make_projection(cfg.m, cfg.n, cfg.matrix_kind, seed_for(cfg.seed, STREAM_PHI, s))
                for s in range(anchors.count)
            ]
        if cfg.mode == "cs_uwb":
            self.dictionary = TemplateDictionary.from_pulse(cfg.pulse, cfg.n, cfg.dt)
            self.solver = CsUwbSolver(self.phis, self.dictionary, precompute_gram=True)
        if cfg.mode == "sequential":
            scale = extension_scale(cfg.sequential)
            self.assumed_k = scale.k_nominal
            # phase span actually swept by the record
            f_actual = cfg.sequential.f_s + cfg.sequential.delta_f
            step = abs(1.0 / f_actual - 1.0 / cfg.sequential.f_p)
            self.seq_coverage = cfg.sequential.n_samples * step

    # -- geometry helpers -------------------------------------------------

    def _los_times(self, true_tag: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(self.anchors.positions - true_tag[None, :], axis=1)
        return d / self.cfg.c

    def _check_window(self, t_need: float) -> None:
        cfg = self.cfg
        if cfg.mode == "sequential":
            horizon = min(1.0 / cfg.sequential.f_p, self.seq_coverage)
        else:
            horizon = (cfg.n - 1) * cfg.dt
        if t_need > horizon:
            raise ConfigError(
                f"geometry needs arrivals up to {t_need:.3e} s but the acquisition "
                f"window ends at {horizon:.3e} s; increase n / n_samples"
            )

    # -- one fix ----------------------------------------------------------

    def locate(self, true_tag, channels, trial: int = 0, initial_guess=None) -> LocateOutcome:
        """Simulate one position fix of a tag at true_tag (mm).

        channels: one excess-delay ChannelRealization per station; trial
        indexes the noise draws so repeated fixes are independent yet
        reproducible.
        """
        cfg = self.cfg
        true_tag = np.asarray(true_tag, dtype=float)
        if true_tag.shape != (self.anchors.dim,):
            raise ValueError(f"true_tag must have shape ({self.anchors.dim},)")
        if len(channels) != self.anchors.count:
            raise ValueError(f"need {self.anchors.count} channels, got {len(channels)}")
        t_los = self._los_times(true_tag)
        spread = max(float(ch.delays.max() - ch.delays.min()) if ch.n_paths else 0.0
                     for ch in channels)
        self._check_window(float(t_los.max()) + spread + 4.0 * cfg.pulse.sigma)
        shifted = [ch.shifted(t) for ch, t in zip(channels, t_los)]

        traces = None
        stopped = False
        if cfg.mode == "sequential":
            times, iters, conv = self._arrivals_sequential(shifted, trial)
            estimate = self._solve(times, initial_guess)
        else:
            frames = [
                synthesize_frame(ch, cfg.pulse, cfg.n, cfg.dt, out_of_window="clip")
                for ch in shifted
            ]
            meas = [
                measure(self.phis[s], frames[s], cfg.n1_snr_db, cfg.n2_snr_db,
                        seed_for(cfg.seed, STREAM_NOISE, trial, s))
                for s in range(len(frames))
            ]
            ys = [mv.y for mv in meas]
            beta = self._effective_beta(meas)
            if cfg.mode == "cs_uwb":
                times, iters, conv, estimate, traces, stopped = self._cs_uwb_fix(
                    ys, beta, initial_guess
                )
            else:
                times, iters, conv = self._arrivals_per_station(ys, beta)
                estimate = self._solve(times, initial_guess)

        error = float(np.linalg.norm(estimate.position - true_tag))
        stations = tuple(
            StationDiagnostics(s, times[s], float(t_los[s]), iters[s], conv[s])
            for s in range(self.anchors.count)
        )
        return LocateOutcome(estimate, error, stations,
                             None if traces is None else tuple(map(tuple, traces)),
                             stopped)

    # -- per-mode reconstruction ------------------------------------------

    def _effective_beta(self, meas) -> float:
        rms = np.sqrt(np.mean(np.concatenate([mv.y for mv in meas]) ** 2))
        pooled = np.sqrt(np.mean([mv.beta**2 for mv in meas]))
        return float(max(pooled, self.cfg.beta_floor_rel * rms, 1e-300))

    def _solve(self, times, initial_guess) -> PositionEstimate:
        tau = np.asarray([times[0] - t for t in times[1:]])
        return self._solve_tau(tau, initial_guess)

    def _solve_tau(self, tau, initial_guess) -> PositionEstimate:
        cfg = self.cfg
        problem = TdoaProblem(self.anchors, tau, cfg.c)
        if cfg.solve_bounds:
            return solve_tdoa_bounded(problem, cfg.solve_bounds, initial_guess,
                                      cfg.err_threshold_mm, cfg.max_tdoa_iters)
        return solve_tdoa(problem, initial_guess, cfg.err_threshold_mm,
                          cfg.max_tdoa_iters)

    def _detect(self, samples: np.ndarray, station: int) -> float:
        try:
            return detect_arrival(SignalFrame(samples, self.cfg.dt)).time
        except NoPulseError as exc:
            raise NoPulseError(f"station {station}: {exc}") from None

    def _arrivals_sequential(self, shifted, trial):
        cfg = self.cfg
        times = []
        for s, ch in enumerate(shifted):
            record = acquire_sequential(ch, cfg.pulse, cfg.sequential, cfg.n1_snr_db,
                                        seed_for(cfg.seed, STREAM_NOISE, trial, s))
            try:
                times.append(estimate_arrival_sequential(record, self.assumed_k))
            except NoPulseError as exc:
                raise NoPulseError(f"station {s}: {exc}") from None
        n = len(times)
        return times, [0] * n, [True] * n

    def _arrivals_per_station(self, ys, beta):
        cfg = self.cfg
        p = cfg.mode_params
        times, iters, conv = [], [], []
        for s, y in enumerate(ys):
            a = self.phis[s].entries
            if cfg.mode == "omp":
                tol = p.get("residual_tol_mult", 1.0) * beta * np.sqrt(y.size)
                res = omp(y, a, max_nonzeros=p.get("max_nonzeros"), residual_tol=tol)
            elif cfg.mode == "bp":
                lam = p.get("lam")
                if lam is None:
                    lam = p.get("lam_rel", 0.1) * float(np.max(np.abs(a.T @ y)))
                res = bp_denoise(y, a, lam=lam, tol=p.get("tol", 1e-8),
                                 max_iters=p.get("max_iters", 20000))
            else:
                res, _ = bcs(y, a, beta, max_iters=cfg.max_recon_iters)
            times.append(self._detect(res.s_hat, s))
            iters.append(res.iterations)
            conv.append(res.converged)
        return times, iters, conv

    def _cs_uwb_fix(self, ys, beta, initial_guess):
        cfg = self.cfg
        n_st = self.anchors.count
        eps = cfg.epsilon_s
        state = {"prev": None, "guess": initial_guess, "estimate": None, "stopped": False}
        traces: list[list[float]] = [[] for _ in range(n_st)]

        def callback(_it, active, mus):
            if active.size == 0:
                return False
            times = []
            for i in range(n_st):
                s_hat = self.dictionary.reconstruct(active, mus[i])
                try:
                    times.append(detect_arrival(SignalFrame(s_hat, cfg.dt)).time)
                except NoPulseError:
                    return False
            for i, t in enumerate(times):
                traces[i].append(t)
            try:
                tau = np.asarray([times[0] - t for t in times[1:]])
                est = self._solve_tau(tau, state["guess"])
                # early supports can put a station's peak on another station's
                # atom; never warm-start later solves off such a fix
                if est.converged:
                    state["guess"] = est.position
                    state["estimate"] = est
            except (ValueError, UwbSimError):
                pass  # geometrically inconsistent arrivals; keep refining
            prev, state["prev"] = state["prev"], times
            stable = prev is not None and max(
                abs(t - tp) for t, tp in zip(times, prev)
            ) < eps
            state["stopped"] = stable
            return stable

        results = self.solver.solve(
            ys, beta, max_iters=cfg.max_recon_iters, callback=callback if cfg.interleave else None
        )
        times = [self._detect(results[s].s_hat, s) for s in range(n_st)]
        iters = [r.iterations for r in results]
        conv = [r.converged for r in results]
        stopped = bool(state["stopped"])
        if stopped and state["estimate"] is not None:
            estimate = state["estimate"]
        else:
            # reconstruction finished on its own: one final solve, warm-started
            # off the callback chain when it ran
            estimate = self._solve(times, state["guess"])
        return times, iters, conv, estimate, (traces if cfg.interleave else None), stopped


def locate_once(true_tag, anchors: AnchorSet, channel_per_station, cfg: PipelineConfig,
                initial_guess=None, trial: int = 0) -> LocateOutcome:
    """One-shot convenience wrapper: build a context, run one fix."""
    ctx = PositioningContext(anchors, cfg)
    return ctx.locate(true_tag, channel_per_station, trial=trial, initial_guess=initial_guess)


def locate_track(waypoints, anchors: AnchorSet, cfg: PipelineConfig) -> list[PositionEstimate]:
    """Locate a moving tag: each solve warm-starts at the previous solution.

    Channels are drawn per waypoint from cfg.channel_profile; failures are
    recorded as non-converged estimates and the track continues.
    """
    ctx = PositioningContext(anchors, cfg)
    out: list[PositionEstimate] = []
    guess = None
    for w, point in enumerate(waypoints):
        channels = [
            generate_channel(cfg.channel_profile, seed_for(cfg.seed, STREAM_CHANNEL, w, s))
            for s in range(anchors.count)
        ]
        try:
            outcome = ctx.locate(point, channels, trial=w, initial_guess=guess)
            est = outcome.estimate
        except (NoPulseError, UwbSimError, ValueError):
            dim = anchors.dim
            est = PositionEstimate(np.full(dim, np.nan), 0, np.inf, False)
        out.append(est)
        if est.converged:
            guess = est.position
    return out
