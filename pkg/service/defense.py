import numpy as np
from scipy.stats import median_abs_deviation

from constants import ERROR_ZERO_MAD
from exceptions_handler import DegenerateStatsError, DomainError
from models.data.env import Frame
from models.data.history import HistoryWindow
from models.data.stats import CleanStats
from models.request.attack import DetectorConfig
from models.request.diffusion import NoiseParams
from service.diffusion import partial_reverse, sigma_schedule
from service.networks import ConditionalDenoiser


def default_sigma_partial(noise: NoiseParams) -> float:
    ladder = sigma_schedule(noise)
    return ladder[1] if len(ladder) > 2 else ladder[0]


def purify(m: ConditionalDenoiser, observed: Frame, observed_history: HistoryWindow, sigma_partial: float | None,
           noise: NoiseParams, seed: int) -> Frame:
    """Diffusion purifier: re-noise the observation and denoise it conditioned on what the victim has seen."""
    sigma_partial = default_sigma_partial(noise) if sigma_partial is None else sigma_partial
    if sigma_partial < 0 or sigma_partial > noise.sigma_max:
        raise DomainError(detail=f"sigma_partial {sigma_partial} outside [0, {noise.sigma_max}]")
    return partial_reverse(m, observed, observed_history, sigma_partial, noise, seed)


def estimate_clean_stats(series: list[float], source_hash: str = "", mad_floor_ratio: float = 0.0) -> CleanStats:
    """Median and MAD of clean distances; the MAD is floored at `mad_floor_ratio * median`."""
    values = np.asarray(series, dtype=np.float64)
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise DegenerateStatsError(detail="no clean distances to estimate statistics from")
    median = float(np.median(values))
    mad = max(float(median_abs_deviation(values, scale=1.0)), mad_floor_ratio * abs(median))
    return CleanStats(median=median, mad=mad, count=int(values.size), source_hash=source_hash)


def mad_detect(series: list[float], stats: CleanStats, cfg: DetectorConfig) -> list[bool]:
    """Flag position t when the last `window` values all exceed median + threshold * MAD."""
    values = np.asarray(series, dtype=np.float64)
    if values.size < cfg.window:
        return []
    above = values > stats.median + cfg.mad_threshold * stats.mad
    flags = np.zeros(values.size, dtype=bool)
    run = 0
    for t, hit in enumerate(above):
        run = run + 1 if hit else 0
        flags[t] = run >= cfg.window
    return flags.tolist()


def cusum_detect(series: list[float], stats: CleanStats, cfg: DetectorConfig) -> int | None:
    """Index of the first step whose one-sided CUSUM statistic exceeds the threshold, or None."""
    if stats.mad == 0:
        raise DegenerateStatsError(detail=ERROR_ZERO_MAD, median=stats.median)
    g = 0.0
    for t, x in enumerate(series):
        g = max(0.0, g + (x - stats.median) / stats.mad - cfg.cusum_drift)
        if g > cfg.cusum_threshold:
            return t
    return None
