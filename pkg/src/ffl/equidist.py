"""Equidistribution experiments: hit counting, Weyl sums, digit statistics.

Orbits n -> q_n * x mod 1 are computed exactly. A rational x = p/q evolves
by modular arithmetic (b * r mod q); points sampled as binary fractions of
K bits use a sliding bit-window fast path for base 2. Comparisons against
the target window are done in floating point with an exact-rational
fallback inside a small tie band, so counts are exact for the represented
point.

Sampled points carry their bit budget: an orbit of length N under base b
consumes about N*log2(b) bits of the sample, so requests beyond
(bits - 64) / log2(b) steps are rejected with the largest admissible
horizon. Exact rational inputs carry exact intent and are never rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import expr as ex
from .ifs import ValidationError
from .rng import stream_rng

TIE_BAND = 2.0 ** -50


# ---------------------------------------------------------------------------
# rate functions psi
# ---------------------------------------------------------------------------

class RateFn:
    """An evaluable rate n -> psi(n), range-checked into [0, 1/2]."""

    def __init__(self, fn, text: str | None = None):
        self._fn = fn
        self.text = text

    @classmethod
    def parse(cls, text: str) -> "RateFn":
        tree = ex.parse(text)
        extra = tree.variables() - {"n"}
        if extra:
            raise ValidationError(f"rate may only use the variable n, got {sorted(extra)}")
        return cls(lambda n: tree.eval({"n": n}), text)

    @classmethod
    def constant(cls, value: float) -> "RateFn":
        return cls(lambda n: np.full_like(np.asarray(n, dtype=float), value),
                   repr(float(value)))

    def values(self, horizon: int) -> np.ndarray:
        n = np.arange(1, horizon + 1, dtype=float)
        vals = np.asarray(self._fn(n), dtype=float)
        if vals.shape != n.shape:
            vals = np.broadcast_to(vals, n.shape).copy()
        bad = np.nonzero((vals < 0.0) | (vals > 0.5))[0]
        if len(bad):
            k = int(bad[0]) + 1
            raise ValidationError(
                f"rate value {vals[bad[0]]!r} at n={k} is outside [0, 1/2]")
        return vals


def sigma(rate: RateFn, horizon: int) -> float:
    """Compensated partial sum of the rate over n = 1..horizon."""
    return math.fsum(rate.values(horizon).tolist())


# ---------------------------------------------------------------------------
# frequency sequences
# ---------------------------------------------------------------------------

@dataclass
class EquidistSpec:
    """A frequency sequence, a target point and a rate, up to a horizon."""

    kind: str                      # "geometric" | "explicit"
    gamma: float
    rate: RateFn
    horizon: int
    base: int | None = None
    terms: np.ndarray | None = None
    lacunary_ratio: float | None = None
    min_gap: int | None = None

    @classmethod
    def geometric(cls, base: int, gamma: float, rate: RateFn, horizon: int) -> "EquidistSpec":
        if base < 2 or int(base) != base:
            raise ValidationError("geometric base must be an integer >= 2")
        if not 0.0 <= gamma <= 1.0:
            raise ValidationError("target must lie in [0, 1]")
        return cls("geometric", gamma, rate, int(horizon), base=int(base))

    @classmethod
    def explicit(cls, terms, gamma: float, rate: RateFn,
                 horizon: int | None = None) -> "EquidistSpec":
        terms = np.asarray(terms, dtype=object)
        if len(terms) == 0:
            raise ValidationError("empty sequence")
        if any(int(t) != t or t < 1 for t in terms):
            raise ValidationError("sequence entries must be positive integers")
        terms = np.array([int(t) for t in terms], dtype=object)
        gaps = [int(b) - int(a) for a, b in zip(terms[:-1], terms[1:])]
        if gaps and min(gaps) <= 0:
            raise ValidationError("sequence must be strictly increasing")
        ratios = [int(b) / int(a) for a, b in zip(terms[:-1], terms[1:])]
        horizon = len(terms) if horizon is None else min(int(horizon), len(terms))
        return cls("explicit", gamma, rate, horizon, terms=terms,
                   lacunary_ratio=min(ratios) if ratios else None,
                   min_gap=min(gaps) if gaps else None)


# ---------------------------------------------------------------------------
# sample points with explicit precision
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridPoint:
    """A binary fraction standing in for a generic real, with a bit budget."""

    numerator: int
    bits: int

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.bits)

    def max_horizon(self, base: int) -> int:
        return max(0, int((self.bits - 64) / math.log2(base)))


def random_grid_point(bits: int, seed: int = 0, stream: int = 0) -> GridPoint:
    """Uniform binary fraction of the given precision."""
    if bits < 65:
        raise ValidationError("need at least 65 bits")
    rng = stream_rng(seed, 0xB175, stream)
    nbytes = (bits + 7) // 8
    raw = int.from_bytes(rng.bytes(nbytes), "big") >> (nbytes * 8 - bits)
    return GridPoint(raw, bits)


def grid_point_for(spec: EquidistSpec, seed: int = 0, stream: int = 0) -> GridPoint:
    """A uniform point with enough precision for the sequence's full horizon."""
    if spec.kind == "geometric":
        bits = int(math.ceil(spec.horizon * math.log2(spec.base))) + 128
    else:
        bits = int(max(int(t) for t in spec.terms[:spec.horizon]).bit_length()) + 128
    return random_grid_point(bits, seed, stream)


def sample_rational_points(maps, weights, count: int, depth: int,
                           seed: int = 0, stream: int = 0) -> list:
    """Exact coding-map samples of an affine system with rational maps.

    ``maps`` is a list of (ratio, translate) pairs of Fractions. Useful for
    digit statistics, where floating point cannot reach deep expansions.
    """
    maps = [(Fraction(r), Fraction(t)) for r, t in maps]
    probs = np.asarray(weights, dtype=float)
    probs = probs / probs.sum()
    rng = stream_rng(seed, 0x2A7, stream)
    idx = rng.choice(len(maps), size=(count, depth), p=probs)
    out = []
    for i in range(count):
        x = Fraction(0)
        for k in idx[i, ::-1]:
            r, t = maps[k]
            x = r * x + t
        out.append(x)
    return out


# ---------------------------------------------------------------------------
# exact orbits
# ---------------------------------------------------------------------------

def _coerce_fraction(x):
    if isinstance(x, GridPoint):
        return x.fraction
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, int):
        return Fraction(x, 1)
    raise ValidationError(f"unsupported point type {type(x).__name__}")


def _window_orbit_base2(num: int, bits: int, horizon: int):
    """64-bit leading windows of frac(2^n x) for n = 1..horizon.

    The fraction's bits are unpacked left-aligned into a byte buffer, so the
    window starting at offset n holds bits n+1..n+64, the leading bits of
    frac(2^n x)."""
    nbytes = (bits + 64 + 7) // 8
    aligned = num << (nbytes * 8 - bits)
    arr = np.frombuffer(aligned.to_bytes(nbytes, "big"), dtype=np.uint8)
    bitarr = np.unpackbits(arr)
    win = np.lib.stride_tricks.sliding_window_view(bitarr, 64)[1:horizon + 1]
    powers = (2.0 ** np.arange(63, -1, -1)) / 2.0 ** 64
    return win.astype(np.float64) @ powers


def _orbit_floats(x, spec: EquidistSpec):
    """frac(q_n x) for n = 1..horizon as floats accurate to ~2^-60, with an
    exact-value callback for tie resolution."""
    frac = _coerce_fraction(x)
    p, q = frac.numerator % frac.denominator, frac.denominator
    N = spec.horizon

    if spec.kind == "geometric":
        b = spec.base
        if isinstance(x, GridPoint):
            cap = x.max_horizon(b)
            if N > cap:
                raise ValidationError(
                    f"horizon {N} exceeds the precision budget of this point; "
                    f"max admissible horizon is {cap}")
        if b == 2 and q & (q - 1) == 0 and q.bit_length() - 1 >= N + 64:
            bits = q.bit_length() - 1
            ys = _window_orbit_base2(p, bits, N)

            def exact(n):  # n is 1-based
                return Fraction((p << n) % q, q)
            return ys, exact
        ys = np.empty(N)
        r = p
        shift = 1 << 64
        for n in range(N):
            r = (b * r) % q
            ys[n] = ((r << 64) // q) / shift

        def exact(n):
            return Fraction(pow(b, n, q) * p % q, q)
        return ys, exact

    terms = spec.terms[:N]
    ys = np.empty(N)
    shift = 1 << 64
    for n, qn in enumerate(terms):
        r = (int(qn) * p) % q
        ys[n] = ((r << 64) // q) / shift

    def exact(n):
        return Fraction(int(terms[n - 1]) * p % q, q)
    return ys, exact


# ---------------------------------------------------------------------------
# hit counting
# ---------------------------------------------------------------------------

@dataclass
class CountResult:
    """Hit count against the doubled rate sum, with normalised deviations.

    ``deviation_half`` uses the square-root normalisation
    (count - 2S) / (S^(1/2) (log(S+2))^(2+eps)); ``deviation_twothirds``
    uses the 2/3 power appropriate for general lacunary sequences.
    """

    horizon: int
    count: int
    two_sigma: float
    deviation_half: float
    deviation_twothirds: float
    epsilon: float


def count_hits(x, spec: EquidistSpec, epsilon: float = 1.0) -> CountResult:
    """Count n <= horizon with dist(q_n x - gamma, Z) <= psi(n), exactly."""
    psi = spec.rate.values(spec.horizon)
    ys, exact = _orbit_floats(x, spec)
    gamma = spec.gamma
    d = np.abs(ys - gamma)
    dist = np.minimum(d, 1.0 - d)
    hits = dist <= psi
    ties = np.abs(dist - psi) <= TIE_BAND
    for n in np.nonzero(ties)[0]:
        y = exact(int(n) + 1)
        g = Fraction(gamma)
        delta = abs(y - g)
        delta = min(delta, 1 - delta)
        hits[n] = delta <= Fraction(float(psi[n]))
    count = int(hits.sum())
    s = sigma(spec.rate, spec.horizon)
    logterm = math.log(s + 2.0)
    denom_half = math.sqrt(s) * logterm ** (2.0 + epsilon) if s > 0 else math.inf
    denom_23 = s ** (2.0 / 3.0) * logterm ** (2.0 + epsilon) if s > 0 else math.inf
    dev = count - 2.0 * s
    return CountResult(spec.horizon, count, 2.0 * s,
                       dev / denom_half, dev / denom_23, epsilon)


def weyl_sums(x, spec: EquidistSpec, harmonics: int) -> np.ndarray:
    """|1/N sum_n exp(-2 pi i h q_n x)| for h = 1..harmonics."""
    if harmonics < 1:
        raise ValidationError("need at least one harmonic")
    ys, _ = _orbit_floats(x, spec)
    h = np.arange(1, harmonics + 1)
    phases = np.exp(-2j * np.pi * np.outer(h, ys))
    return np.abs(phases.mean(axis=1))


# ---------------------------------------------------------------------------
# digit statistics
# ---------------------------------------------------------------------------

@dataclass
class DigitFrequency:
    base: int
    count: int
    histogram: np.ndarray
    chi_square: float
    dof: int
    digits: np.ndarray


def digit_freq(x, base: int, count: int, keep_digits: bool = True,
               budget: int = 1_000_000) -> DigitFrequency:
    """First ``count`` digits of x in the given base, exactly.

    The input is treated as an exact rational (floats are dyadic
    rationals); digits are produced by exact integer arithmetic. The
    chi-square statistic compares the histogram against the uniform law.
    """
    if base < 2:
        raise ValidationError("base must be >= 2")
    if count > budget:
        raise ValidationError(f"digit budget is {budget}")
    frac = _coerce_fraction(x)
    p, q = frac.numerator % frac.denominator, frac.denominator
    digits = np.empty(count, dtype=np.int64)
    for i in range(count):
        p *= base
        digits[i] = p // q
        p %= q
    hist = np.bincount(digits, minlength=base).astype(np.int64)
    expected = count / base
    chi2 = float(((hist - expected) ** 2 / expected).sum())
    return DigitFrequency(base, count, hist, chi2, base - 1,
                          digits if keep_digits else np.empty(0, dtype=np.int64))
