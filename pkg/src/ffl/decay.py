"""Decay-exponent fits, sparse-frequency covers, and non-decay probes.

An evaluator is any callable frequency -> FourierValue. Band maxima use a
nested low-discrepancy frequency set (radical-inverse points plus seeded
jitter inside each point's dyadic cell), so enlarging the sample count
only ever adds frequencies; the left band edge is always included exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ifs import BudgetExhausted, ValidationError
from .measure import FourierValue
from .rng import stream_rng


# ---------------------------------------------------------------------------
# band maxima
# ---------------------------------------------------------------------------

@dataclass
class BandMax:
    index: int
    lower: float
    upper: float
    peak: float
    peak_frequency: float
    samples: int
    max_error_bound: float
    excluded: int = 0


def _radical_inverse(i: int) -> float:
    out, denom = 0.0, 1.0
    while i:
        denom *= 2.0
        out += (i & 1) / denom
        i >>= 1
    return out


def _band_frequencies(lower: float, width: float, count: int,
                      seed: int, band_id: int) -> np.ndarray:
    """Nested stratified points in [lower, lower+width); index 0 is the
    band edge itself, later indices never move as count grows."""
    xs = np.empty(count)
    xs[0] = 0.0
    for i in range(1, count):
        cell = 2.0 ** -(i.bit_length())
        jitter = stream_rng(seed, 0xBA4D, band_id, i).random()
        xs[i] = _radical_inverse(i) + jitter * cell
    return lower + xs * width


def band_maxima(evaluator, band_indices, samples_per_band: int = 64,
                seed: int = 0, band_base: float = 2.0) -> list:
    """Per band [base^j, 2*base^j): the largest |value| over the sample set.

    Evaluator budget failures are excluded from the maximum and counted.
    """
    if samples_per_band < 64:
        raise ValidationError("need at least 64 samples per band")
    out = []
    for j in band_indices:
        lower = band_base ** j
        freqs = _band_frequencies(lower, lower, samples_per_band, seed, int(j))
        peak, arg, err, excluded = -1.0, math.nan, 0.0, 0
        for xi in freqs:
            try:
                fv = evaluator(float(xi))
            except BudgetExhausted:
                excluded += 1
                continue
            if abs(fv.value) > peak:
                peak, arg = abs(fv.value), float(xi)
            err = max(err, fv.error_bound)
        out.append(BandMax(int(j), lower, 2.0 * lower, peak, arg,
                           samples_per_band - excluded, err, excluded))
    return out


# ---------------------------------------------------------------------------
# decay-exponent fit
# ---------------------------------------------------------------------------

@dataclass
class DecayFit:
    """Least-squares fit of log(peak) against log(band edge).

    ``exponent`` is the negated slope; positive means decay.
    """

    exponent: float
    prefactor: float
    stderr: float
    r_squared: float
    bands_used: int
    bands_excluded: int


def fit_eta(bands) -> DecayFit:
    """Fit peak ~ C * T^(-exponent) over band maxima; zero peaks are
    excluded (their logs are undefined) and counted."""
    usable = [b for b in bands if b.peak > 0.0]
    excluded = len(bands) - len(usable)
    if len(usable) < 4:
        raise ValidationError("need at least 4 bands with positive maxima")
    x = np.log([b.lower for b in usable])
    y = np.log([b.peak for b in usable])
    n = len(x)
    xbar, ybar = x.mean(), y.mean()
    sxx = float(((x - xbar) ** 2).sum())
    slope = float(((x - xbar) * (y - ybar)).sum()) / sxx
    intercept = ybar - slope * xbar
    resid = y - slope * x - intercept
    dof = n - 2
    sigma2 = float((resid ** 2).sum()) / dof if dof else 0.0
    stderr = math.sqrt(sigma2 / sxx)
    sst = float(((y - ybar) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / sst if sst > 0 else 1.0
    return DecayFit(-slope, math.exp(intercept), stderr, r2, n, excluded)


# ---------------------------------------------------------------------------
# sparse-frequency covering
# ---------------------------------------------------------------------------

@dataclass
class SparseCover:
    limit: float
    threshold_exponent: float
    threshold: float
    count: int
    grid_step: float
    marked: np.ndarray  # sorted starts of marked unit intervals


def sparse_cover(evaluator, limit: float, threshold_exponent: float,
                 grid_step: float = 0.25) -> SparseCover:
    """Count unit intervals in [-limit, limit] holding a grid frequency
    with |value| + error above limit^(-threshold_exponent).

    The transform of a real measure has even modulus, so only nonnegative
    grid frequencies are evaluated; marks are mirrored. Marking uses
    |value| + error so a rigorous error can only overcount, never hide a
    crossing.
    """
    if grid_step > 0.25:
        raise ValidationError("grid step must be at most 1/4")
    if limit < 4:
        raise ValidationError("limit must be at least 4")
    threshold = limit ** (-threshold_exponent)
    marked = set()
    for xi in np.arange(0.0, limit + grid_step / 2, grid_step):
        fv = evaluator(float(xi))
        if abs(fv.value) + fv.error_bound >= threshold:
            marked.add(math.floor(xi))
            marked.add(math.floor(-xi))
    marks = np.array(sorted(marked), dtype=int)
    return SparseCover(float(limit), float(threshold_exponent), threshold,
                       len(marks), float(grid_step), marks)


# ---------------------------------------------------------------------------
# non-decay probe along a frequency family
# ---------------------------------------------------------------------------

def rajchman_probe(evaluator, family, count: int | None = None) -> list:
    """Evaluate along a frequency family: either ("geometric", b) with
    ``count`` terms, or an explicit list of frequencies."""
    if isinstance(family, tuple) and family and family[0] == "geometric":
        if count is None:
            raise ValidationError("geometric family needs a count")
        base = float(family[1])
        freqs = [base ** n for n in range(count)]
    else:
        freqs = [float(f) for f in family]
        if count is not None:
            freqs = freqs[:count]
    return [evaluator(f) for f in freqs]
