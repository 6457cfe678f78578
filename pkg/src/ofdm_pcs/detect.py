"""Weak-target detection next to strong self-interference, with SO-CFAR.

Per trial: a random OFDM symbol is transmitted; the receiver sees the direct
self-interference copy at lag zero, a weak target echo a few range cells
away, and white noise.  Matched filtering with the known transmitted data
gives a range profile; a smallest-of CFAR thresholds each cell by the smaller
of its leading/lagging reference-window means so the interference peak in one
window cannot mask the target.  The threshold multiplier is calibrated by
bisection against the empirical false-alarm rate on noise-only profiles.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import math
import numpy as np

from .constellation import Constellation
from .ofdm import OfdmConfig, SampledSignal, symbol_signal_batch


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CfarConfig:
    """Reference/guard cells per side and the threshold multiplier.

    ``alpha=None`` means "calibrate before use".  Defaults put 16 reference
    cells behind 2 guard cells on each side: wide enough that an interferer 8
    cells away lands inside one window, which is exactly the case the
    smallest-of rule is for.

    A truncated window with fewer than ``min_reference_cells`` remaining is
    not a usable background estimate (a one-cell mean under the smallest-of
    rule has a 1/(1+alpha) exceedance tail that would swallow the whole
    false-alarm budget), so such sides are treated like the fully missing
    edge case and the other window decides alone.
    """

    window_cells: int = 16
    guard_cells: int = 2
    alpha: float | None = None
    min_reference_cells: int = 4

    def __post_init__(self):
        if self.window_cells < 1:
            raise ValueError(f"window_cells must be >= 1, got {self.window_cells}")
        if self.guard_cells < 0:
            raise ValueError(f"guard_cells must be >= 0, got {self.guard_cells}")
        if self.alpha is not None and not (self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.min_reference_cells < 1:
            raise ValueError(
                f"min_reference_cells must be >= 1, got {self.min_reference_cells}"
            )

    def min_profile_len(self) -> int:
        return 2 * (self.window_cells + self.guard_cells) + 2

    def window_floor(self) -> int:
        return min(self.min_reference_cells, self.window_cells)


def matched_filter(rx: SampledSignal, reference: SampledSignal) -> np.ndarray:
    """|cross-correlation|^2 of rx against the known replica, lags 0..N-1."""
    if rx.samples.shape != reference.samples.shape:
        raise ValueError(
            f"rx and reference lengths differ: {rx.samples.shape} vs {reference.samples.shape}"
        )
    return _matched_filter_batch(rx.samples[None, :], reference.samples[None, :])[0]


def _matched_filter_batch(rx: np.ndarray, ref: np.ndarray) -> np.ndarray:
    n = rx.shape[-1]
    size = 2 * n
    spec = np.fft.fft(rx, n=size, axis=-1) * np.conj(np.fft.fft(ref, n=size, axis=-1))
    corr = np.fft.ifft(spec, axis=-1)[..., :n]
    return np.abs(corr) ** 2


def reference_means(profiles: np.ndarray, cfar: CfarConfig):
    """Leading/lagging reference-window means for every cell.

    Windows are truncated at the profile edges; a side with no cells at all
    yields NaN there.  Accepts a single profile or a (trials, cells) batch.
    """
    profiles = np.asarray(profiles, dtype=float)
    n = profiles.shape[-1]
    if n < cfar.min_profile_len():
        raise ValueError(
            f"profile with {n} cells is too short for window={cfar.window_cells}, "
            f"guard={cfar.guard_cells}"
        )
    cs = np.concatenate(
        [np.zeros(profiles.shape[:-1] + (1,)), np.cumsum(profiles, axis=-1)], axis=-1
    )
    i = np.arange(n)
    lead_lo = np.clip(i - cfar.guard_cells - cfar.window_cells, 0, n)
    lead_hi = np.clip(i - cfar.guard_cells, 0, n)
    lag_lo = np.clip(i + cfar.guard_cells + 1, 0, n)
    lag_hi = np.clip(i + cfar.guard_cells + 1 + cfar.window_cells, 0, n)
    with np.errstate(invalid="ignore"):
        lead = (cs[..., lead_hi] - cs[..., lead_lo]) / np.where(
            lead_hi > lead_lo, lead_hi - lead_lo, np.nan
        )
        lag = (cs[..., lag_hi] - cs[..., lag_lo]) / np.where(
            lag_hi > lag_lo, lag_hi - lag_lo, np.nan
        )
    return lead, lag


def so_cfar(profile: np.ndarray, cfar: CfarConfig) -> np.ndarray:
    """Per-cell detection decisions under the smallest-of rule.

    Threshold = alpha * min(leading mean, lagging mean); edge cells fall back
    to the single available window.  Decisions are invariant to a global
    positive scaling of the profile.
    """
    if cfar.alpha is None:
        raise ValueError("CfarConfig.alpha is unset; calibrate first")
    lead, lag = reference_means(profile, cfar)
    threshold = cfar.alpha * np.fmin(lead, lag)
    return np.asarray(profile) > threshold


@dataclass
class CalibrationResult:
    alpha: float
    empirical_pfa: float
    cells: int
    iterations: int


def calibrate_alpha(
    cfar: CfarConfig,
    profile_fn,
    pfa_target: float,
    calib_trials: int,
    seed,
    max_iter: int = 200,
) -> CalibrationResult:
    """Bisect the threshold multiplier to the target false-alarm rate.

    ``profile_fn(rng, count)`` must return noise-only profiles of shape
    (count, cells).  The cell/background ratios are computed once; bisection
    then drives the empirical exceedance fraction to ``pfa_target``.  Requires
    enough cells for at least 100 expected false alarms.
    """
    if not (0.0 < pfa_target < 1.0):
        raise ValueError(f"pfa_target must be in (0, 1), got {pfa_target}")
    profiles = profile_fn(np.random.default_rng(seed), calib_trials)
    lead, lag = reference_means(profiles, cfar)
    background = np.fmin(lead, lag)
    finite = np.isfinite(background)
    # A zero background (cumsum cancellation on near-empty tail windows) trips
    # the cell at any alpha, exactly as so_cfar decides it; keep it as inf.
    ratios = np.full(np.count_nonzero(finite), np.inf)
    positive = background[finite] > 0
    ratios[positive] = profiles[finite][positive] / background[finite][positive]
    cells = int(ratios.size)
    if cells * pfa_target < 100:
        raise ValueError(
            f"{calib_trials} trials give {cells} cells, expecting "
            f"{cells * pfa_target:.1f} false alarms; need >= 100 for calibration"
        )

    def pfa_of(alpha: float) -> float:
        return np.count_nonzero(ratios > alpha) / cells

    lo, hi = 0.0, 2.0
    iterations = 0
    while pfa_of(hi) > pfa_target:
        hi *= 2.0
        iterations += 1
        if iterations > 60:
            raise CalibrationError(
                f"no alpha below {hi} reaches pfa {pfa_target}; ratio max is {ratios.max():.3g}"
            )
    for _ in range(max_iter):
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        iterations += 1
        if pfa_of(mid) > pfa_target:
            lo = mid
        else:
            hi = mid
    alpha = 0.5 * (lo + hi)
    achieved = pfa_of(alpha)
    if not (0.8 * pfa_target <= achieved <= 1.2 * pfa_target):
        raise CalibrationError(
            f"calibration landed at pfa {achieved:.3g} for target {pfa_target:.3g} "
            f"(alpha {alpha:.6g}, {cells} cells, {iterations} iterations)"
        )
    return CalibrationResult(
        alpha=float(alpha), empirical_pfa=float(achieved), cells=cells, iterations=iterations
    )


def instrumented_range(cfg: OfdmConfig) -> int:
    """Default extent of the CFAR-monitored profile: lags with at least half
    the symbol in the correlation support.

    Beyond that, the zero-padded correlation's reference energy ramps toward
    zero and the cell/background ratios grow pathologically heavy tails; a
    handful of such cells would otherwise consume the whole false-alarm
    budget at small targets (an alpha of ~337 instead of ~45 at 1e-4).
    """
    return cfg.num_samples // 2


def noise_profile_sampler(cfg: OfdmConfig, constellation: Constellation, cells: int | None = None):
    """Noise-only matched-filter profiles under random known transmit data.

    Profiles are truncated to the instrumented range (``cells``, default
    :func:`instrumented_range`), matching the population the detector
    thresholds in operation.
    """
    cells = instrumented_range(cfg) if cells is None else int(cells)

    def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        symbols = constellation.sample_symbols(count * cfg.num_subcarriers, rng)
        tx = symbol_signal_batch(cfg, symbols.reshape(count, cfg.num_subcarriers))
        noise = _complex_noise(rng, tx.shape, 1.0)
        return _matched_filter_batch(noise, tx)[:, :cells]

    return sampler


def _complex_noise(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass
class DetectionScenario:
    """Full experiment description for one constellation.

    ``instrumented_cells`` bounds the profile region the CFAR monitors (and
    the calibration population); ``None`` picks :func:`instrumented_range`.
    """

    cfg: OfdmConfig
    constellation: Constellation
    snr_grid_db: np.ndarray
    si_to_noise_db: float = 10.0
    target_cell_offset: int = 8
    pfa_target: float = 1e-3
    trials: int = 5000
    cfar: CfarConfig = field(default_factory=CfarConfig)
    calib_trials: int = 1000
    instrumented_cells: int | None = None
    seed: int = 0

    def __post_init__(self):
        self.snr_grid_db = np.asarray(self.snr_grid_db, dtype=float)
        if not (0.0 < self.pfa_target < 1.0):
            raise ValueError(f"pfa_target must be in (0, 1), got {self.pfa_target}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.instrumented_cells is None:
            self.instrumented_cells = instrumented_range(self.cfg)
        n = int(self.instrumented_cells)
        if not (0 < n <= self.cfg.num_samples):
            raise ValueError(f"instrumented_cells must lie in (0, {self.cfg.num_samples}]")
        if n < self.cfar.min_profile_len():
            raise ValueError("instrumented profile is too short for the CFAR geometry")
        if not (self.cfar.guard_cells < self.target_cell_offset < n):
            raise ValueError(
                f"target cell {self.target_cell_offset} must lie in the instrumented "
                f"profile and clear of the interference guard region"
            )


def pd_experiment(scn: DetectionScenario, *, threads: int = 1, chunk_size: int = 512) -> list[dict]:
    """Detection probability at the target cell over the sensing-SNR grid.

    Calibrates alpha against the scenario's false-alarm target if the CFAR
    config does not already carry one.  Every SNR point runs on its own child
    seed; results are deterministic and independent of the thread count.
    Returns rows ``{"snr_db", "pd", "trials"}``.
    """
    grid = scn.snr_grid_db
    seeds = np.random.SeedSequence(scn.seed).spawn(grid.size + 1)
    cfar = scn.cfar
    if cfar.alpha is None:
        calib = calibrate_alpha(
            cfar,
            noise_profile_sampler(scn.cfg, scn.constellation, scn.instrumented_cells),
            scn.pfa_target,
            scn.calib_trials,
            seeds[0],
        )
        cfar = replace(cfar, alpha=calib.alpha)

    num = scn.cfg.num_subcarriers
    n_samples = scn.cfg.num_samples
    offset = scn.target_cell_offset
    # Amplitudes scale so received power over the L-subcarrier waveform hits
    # the requested ratios against unit-variance noise.
    gain_si = math.sqrt(10.0 ** (scn.si_to_noise_db / 10.0) / num)

    def run_point(i: int) -> dict:
        rng = np.random.default_rng(seeds[i + 1])
        gain_target = math.sqrt(10.0 ** (grid[i] / 10.0) / num)
        # Draw everything up front; chunking below only bounds memory and can
        # never alter the per-trial decisions.
        symbols = scn.constellation.sample_symbols(scn.trials * num, rng).reshape(scn.trials, num)
        noise = _complex_noise(rng, (scn.trials, n_samples), 1.0)
        hits = 0
        for start in range(0, scn.trials, chunk_size):
            tx = symbol_signal_batch(scn.cfg, symbols[start : start + chunk_size])
            delayed = np.zeros_like(tx)
            delayed[:, offset:] = tx[:, : n_samples - offset]
            rx = gain_si * tx + gain_target * delayed + noise[start : start + tx.shape[0]]
            profiles = _matched_filter_batch(rx, tx)[:, : scn.instrumented_cells]
            lead, lag = reference_means(profiles, cfar)
            threshold = cfar.alpha * np.fmin(lead, lag)
            hits += int(np.count_nonzero(profiles[:, offset] > threshold[:, offset]))
        return {"snr_db": float(grid[i]), "pd": hits / scn.trials, "trials": scn.trials}

    if threads > 1 and grid.size > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run_point, range(grid.size)))
    return [run_point(i) for i in range(grid.size)]
