"""Cosinor fits and rest-activity rhythm parameters of windowed feature series."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientPoints, RankDeficient, SpanTooShort

RHYTHM_PARAMS = ("mesor", "amplitude", "acrophase", "relative_amplitude", "mse", "m10", "l5",
                 "ra", "iv")
PERIODS = (24, 48, 96)
DEGENERATE_EPS = 1e-9


@dataclass(frozen=True)
class MSEParams:
    m: int = 2
    r: float = 0.2
    scales: tuple[int, ...] = (1, 2, 3)


@dataclass
class CosinorFit:
    period_hours: float
    n_components: int
    mesor: float
    coef_sin: np.ndarray  # A_{i,1}
    coef_cos: np.ndarray  # A_{i,2}
    rss: float

    @property
    def amplitudes(self) -> np.ndarray:
        return np.hypot(self.coef_sin, self.coef_cos)

    @property
    def amplitude(self) -> float:
        return float(self.amplitudes[0])

    @property
    def acrophase_hours(self) -> float:
        """Time of the first peak of the fundamental component, in [0, P)."""
        omega = 2 * np.pi / self.period_hours
        phase = np.arctan2(self.coef_sin[0], self.coef_cos[0]) % (2 * np.pi)
        hours = phase / omega
        return float(hours if hours < self.period_hours else 0.0)


def cosinor_design(t, period, n_components) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    cols = [np.ones_like(t)]
    for i in range(1, n_components + 1):
        arg = 2 * np.pi * i * t / period
        cols += [np.sin(arg), np.cos(arg)]
    return np.column_stack(cols)


def cosinor_fit(t, y, period: float, n_components: int = 1) -> CosinorFit:
    """Ordinary least-squares cosinor with ``n_components`` harmonics of ``period``.

    Sampling times may be irregular.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if period <= 0:
        raise ValueError("period must be positive")
    n_coef = 2 * n_components + 1
    if y.size < n_coef:
        raise InsufficientPoints(f"{y.size} points for {n_coef} coefficients")
    X = cosinor_design(t, period, n_components)
    beta, _, rank, sv = np.linalg.lstsq(X, y, rcond=None)
    if rank < n_coef or sv[-1] < 1e-10 * sv[0]:
        raise RankDeficient(f"design rank {rank} < {n_coef}")
    resid = y - X @ beta
    return CosinorFit(
        period_hours=float(period),
        n_components=n_components,
        mesor=float(beta[0]),
        coef_sin=beta[1::2].copy(),
        coef_cos=beta[2::2].copy(),
        rss=float(resid @ resid),
    )


def relative_amplitude(fit: CosinorFit) -> tuple[float, bool]:
    """amplitude / mesor, and whether the mesor was too small (value forced to 0)."""
    if abs(fit.mesor) < DEGENERATE_EPS:
        return 0.0, True
    return fit.amplitude / fit.mesor, False


def _count_matches(x: np.ndarray, m: int, tol: float) -> tuple[int, int]:
    """Template pairs within ``tol`` (Chebyshev) at lengths m and m + 1.

    Uses the first n - m templates for both lengths so the counts are comparable.
    """
    n = x.size
    n_templates = n - m
    emb = np.lib.stride_tricks.sliding_window_view(x, m + 1)[:n_templates]
    b = a = 0
    for i in range(n_templates - 1):
        d = np.abs(emb[i + 1:] - emb[i])
        close_m = d[:, :m].max(axis=1) <= tol
        b += int(close_m.sum())
        a += int((close_m & (d[:, m] <= tol)).sum())
    return a, b


def sample_entropy(x, m: int, tol: float) -> tuple[float, bool]:
    """-ln(A/B); when no template pair matches, a sentinel and True are returned.

    The sentinel is ln of the number of template pairs, i.e. the entropy a
    single surviving match would give.
    """
    x = np.asarray(x, dtype=float)
    a, b = _count_matches(x, m, tol)
    if a == 0 or b == 0:
        n_t = x.size - m
        return float(np.log(max(n_t * (n_t - 1) / 2, 1.0))), True
    return float(-np.log(a / b)), False


def coarse_grain(x, scale: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.size // scale
    return x[: n * scale].reshape(n, scale).mean(axis=1)


def sample_entropy_multiscale(series, m: int = 2, r: float = 0.2, scales=(1, 2, 3)):
    """Mean sample entropy over coarse-grained copies of ``series``.

    The tolerance is ``r`` times the (population) std of the original series.

    Returns
    -------
    value : float
    flagged : bool
        True if any scale had no matching templates.
    """
    x = np.asarray(series, dtype=float)
    if r <= 0:
        raise ValueError("r must be positive")
    if x.size < 10 * max(scales):
        raise InsufficientPoints(f"{x.size} points, need {10 * max(scales)} for scale {max(scales)}")
    tol = r * x.std()
    vals, flags = zip(*(sample_entropy(coarse_grain(x, s), m, tol) for s in scales))
    return float(np.mean(vals)), any(flags)


def span_length(hours: float, step_minutes: float) -> int:
    return max(1, int(round(hours * 60.0 / step_minutes)))


def m10_l5_ra(values, step_minutes: float = 60.0):
    """Most-active 10h mean, least-active 5h mean and their relative amplitude.

    ``values`` are consecutive samples ``step_minutes`` apart; a span of h hours
    covers round(h*60/step) consecutive samples. Returns (m10, l5, ra, flagged).
    """
    x = np.asarray(values, dtype=float)
    k10 = span_length(10, step_minutes)
    k5 = span_length(5, step_minutes)
    if x.size < k10:
        raise SpanTooShort(f"{x.size} samples at {step_minutes} min cover less than 10h")
    c = np.concatenate([[0.0], np.cumsum(x)])
    m10 = float(np.max((c[k10:] - c[:-k10]) / k10))
    l5 = float(np.min((c[k5:] - c[:-k5]) / k5))
    denom = m10 + l5
    if abs(denom) < DEGENERATE_EPS:
        return m10, l5, 0.0, True
    return m10, l5, (m10 - l5) / denom, False


def intradaily_variability(values) -> tuple[float, bool]:
    """N * sum of squared first differences / ((N - 1) * sum of squared deviations)."""
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 3:
        raise InsufficientPoints("intradaily variability needs at least 3 points")
    den = (n - 1) * np.sum((x - x.mean()) ** 2)
    if den <= DEGENERATE_EPS * max(1.0, n * float(np.max(np.abs(x))) ** 2):
        return 0.0, True
    return float(n * np.sum(np.diff(x) ** 2) / den), False


@dataclass
class RhythmVector:
    mesor: float
    amplitude: float
    acrophase: float
    relative_amplitude: float
    mse: float
    m10: float
    l5: float
    ra: float
    iv: float
    period_hours: float
    source: str = ""
    flags: tuple[str, ...] = field(default_factory=tuple)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, p) for p in RHYTHM_PARAMS], dtype=float)


def rhythm_vector(values, times_hours, period: float, *, step_minutes: float,
                  mse: MSEParams = MSEParams(), source: str = "",
                  span_hours: float | None = None) -> RhythmVector:
    """The nine rhythm parameters of one feature series; degenerate parts become flagged zeros."""
    y = np.asarray(values, dtype=float)
    t = np.asarray(times_hours, dtype=float)
    flags = []

    if span_hours is None:
        span_hours = (t.max() - t.min()) + step_minutes / 60.0 if t.size else 0.0
    if span_hours < period - 1e-9:
        flags.append("under_spanned")
    try:
        fit = cosinor_fit(t, y, period, 1)
        mesor, amplitude, acrophase = fit.mesor, fit.amplitude, fit.acrophase_hours
        rel, degenerate = relative_amplitude(fit)
        if degenerate:
            flags.append("relative_amplitude_degenerate")
    except (RankDeficient, InsufficientPoints):
        mesor, amplitude, acrophase, rel = float(np.mean(y)) if y.size else 0.0, 0.0, 0.0, 0.0
        flags.append("cosinor_failed")
    if amplitude < DEGENERATE_EPS * max(1.0, abs(mesor)):
        # no measurable rhythm: the phase is meaningless
        amplitude, acrophase, rel = 0.0, 0.0, 0.0

    scales = tuple(s for s in mse.scales if y.size >= 10 * s)
    if scales:
        mse_val, bad = sample_entropy_multiscale(y, mse.m, mse.r, scales)
        if bad:
            flags.append("mse_no_matches")
    else:
        mse_val = 0.0
        flags.append("mse_too_short")

    try:
        m10, l5, ra, bad = m10_l5_ra(y, step_minutes)
        if bad:
            flags.append("ra_degenerate")
    except SpanTooShort:
        m10 = l5 = ra = 0.0
        flags.append("span_too_short")

    iv, bad = intradaily_variability(y) if y.size >= 3 else (0.0, True)
    if bad:
        flags.append("iv_constant")

    return RhythmVector(mesor, amplitude, acrophase, rel, mse_val, m10, l5, ra, iv,
                        float(period), source, tuple(flags))


def rhythm_matrix(feature_matrix, starts_minutes, width_minutes, step_minutes, period,
                  mse: MSEParams = MSEParams(), names=None) -> tuple[np.ndarray, list[str]]:
    """Rhythm vectors of every column of a window feature matrix, flattened feature-major.

    Window times are window centres in hours from the start of the day.
    """
    feature_matrix = np.asarray(feature_matrix, dtype=float)
    starts = np.asarray(starts_minutes, dtype=float)
    t = (starts + width_minutes / 2.0) / 60.0
    span = (starts[-1] + width_minutes - starts[0]) / 60.0
    out = np.empty((feature_matrix.shape[1], len(RHYTHM_PARAMS)))
    flags = []
    for j in range(feature_matrix.shape[1]):
        rv = rhythm_vector(feature_matrix[:, j], t, period, step_minutes=step_minutes, mse=mse,
                           source=names[j] if names else str(j), span_hours=span)
        out[j] = rv.as_array()
        flags += [f"{rv.source}:{f}" for f in rv.flags]
    return out.ravel(), flags


def rhythm_names(feature_names) -> list[str]:
    return [f"{f}.{p}" for f in feature_names for p in RHYTHM_PARAMS]
