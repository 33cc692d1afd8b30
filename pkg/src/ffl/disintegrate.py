"""Random-convolution disintegration of stationary measures.

Words of a fixed block length are grouped into equivalence classes: two
words are equivalent when they agree outside the distinguished separated
pair of fibre symbols and use pair symbols in the same slots. Drawing an
i.i.d. sequence of classes and, inside each class, a uniformly random
member produces an infinite convolution of finitely supported measures
whose average over class sequences reproduces the stationary measure.

This module builds class tables, samples class sequences, evaluates the
convolution Fourier products, checks the large-deviation membership
conditions used to control typical sequences, and computes the
near-integer (carry-propagation) diagnostics behind sparse-frequency
decay counting.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import product as iproduct

import numpy as np

from .ifs import (CIFS, FibreProductCIFS, BudgetExhausted, ValidationError,
                  fibre_product_from_1d)
from .measure import FourierValue, character, fourier_exact, TWO_PI
from .rng import stream_rng, spawn_seed

CLASS_BUDGET = 1_000_000


# ---------------------------------------------------------------------------
# equivalence classes
# ---------------------------------------------------------------------------

@dataclass
class EquivClass:
    """One class of block words sharing base word, ratio and weight.

    ``translates`` lists the composed fibre offsets of all members (sorted
    ascending); distinct members have disjoint fibre images. ``pair_delta``
    is the offset difference of the canonical member pair differing only in
    the first pair slot (None when the class has no pair slots).
    """

    representative: tuple
    size: int
    ratio: float
    base_word: tuple
    translates: np.ndarray
    member_weight: float
    weight: float
    special_count: int
    pair_delta: float | None

    @property
    def min_member_gap(self) -> float:
        """Smallest gap between consecutive member images of [0,1]."""
        if self.size < 2:
            return math.inf
        t = self.translates
        return float(np.min(np.diff(t)) - abs(self.ratio))


@dataclass
class ClassTable:
    """All equivalence classes on words of one block length."""

    system: FibreProductCIFS
    block_length: int
    classes: list

    def __post_init__(self):
        self.sizes = np.array([c.size for c in self.classes])
        self.ratios = np.array([c.ratio for c in self.classes])
        self.weights = np.array([c.weight for c in self.classes])
        self.pair_deltas = np.array([c.pair_delta if c.pair_delta is not None
                                     else np.nan for c in self.classes])

    def __len__(self):
        return len(self.classes)

    @property
    def pair_weight(self) -> float:
        return self.system.pair_weight

    @property
    def pair_gap(self) -> float:
        return self.system.pair_gap

    def lyapunov(self) -> float:
        """Per-letter Lyapunov exponent of the underlying fibre system."""
        return self.system.lyapunov()


def _fibre_compose(maps):
    ratio, translate = 1.0, 0.0
    for m in maps:
        translate += ratio * m.translate
        ratio *= m.ratio
    return ratio, translate


def build_classes(fp: FibreProductCIFS, block_length: int,
                  budget: int = CLASS_BUDGET) -> ClassTable:
    """Partition all words of the given block length into classes.

    Within the enumeration budget this is a full partition: class weights
    sum to 1 and sizes follow 2^(number of pair slots).
    """
    if block_length < 1:
        raise ValidationError("block length must be >= 1")
    alphabet = fp.alphabet
    if len(alphabet) ** block_length > budget:
        raise BudgetExhausted(
            f"{len(alphabet)}^{block_length} words exceed the class budget "
            f"{budget}; reduce the block length or truncate the alphabet")
    s_a, s_b = fp.special_symbols
    marker = object()

    groups: dict = {}
    for word in iproduct(alphabet, repeat=block_length):
        key = tuple(marker if s in (s_a, s_b) else s for s in word)
        ratio, translate = _fibre_compose([fp.fibre_map(s) for s in word])
        weight = math.prod(fp.weights[s] for s in word)
        entry = groups.setdefault(key, [])
        entry.append((word, ratio, translate, weight))

    classes = []
    for key, members in groups.items():  # insertion order is deterministic
        n_special = sum(1 for k in key if k is marker)
        rep = tuple(s_a if k is marker else k for k in key)
        ratios = np.array([m[1] for m in members])
        weights = np.array([m[3] for m in members])
        if np.max(np.abs(ratios - ratios[0])) > 1e-12:
            raise ValidationError("class members disagree on the composed ratio")
        if np.max(np.abs(weights - weights[0])) > 1e-12:
            raise ValidationError("class members disagree on the weight")
        translates = np.sort(np.array([m[2] for m in members]))
        pair_delta = None
        if n_special:
            slot = next(i for i, k in enumerate(key) if k is marker)
            other = tuple(s_b if i == slot else s for i, s in enumerate(rep))
            _, t_rep = _fibre_compose([fp.fibre_map(s) for s in rep])
            _, t_other = _fibre_compose([fp.fibre_map(s) for s in other])
            pair_delta = abs(t_rep - t_other)
        classes.append(EquivClass(
            representative=rep,
            size=len(members),
            ratio=float(ratios[0]),
            base_word=tuple(s[0] for s in rep),
            translates=translates,
            member_weight=float(weights[0]),
            weight=float(weights[0]) * len(members),
            special_count=n_special,
            pair_delta=pair_delta,
        ))
        if len(members) != 2 ** n_special:
            raise ValidationError("class size does not match 2^(pair slots)")
    return ClassTable(fp, block_length, classes)


# ---------------------------------------------------------------------------
# sampled class sequences and their convolution measures
# ---------------------------------------------------------------------------

@dataclass
class ConvolutionFactor:
    """One factor of the infinite convolution: uniformly weighted atoms."""

    atoms: np.ndarray
    weight_each: float


@dataclass
class OmegaSample:
    """A finite prefix of an i.i.d. class sequence with derived data.

    ``cum_ratios[m]`` is the signed product of the first m+1 class ratios;
    ``base_point`` is the prefix approximation of the base coordinate.
    """

    table: ClassTable
    indices: np.ndarray
    seed: int
    stream: int

    def __post_init__(self):
        ratios = self.table.ratios[self.indices]
        self.cum_ratios = np.cumprod(ratios)
        self.log_abs_ratios = np.log(np.abs(ratios))
        self.base_point = self._fold_base()
        self._atoms_cache = None

    def __len__(self):
        return len(self.indices)

    def _fold_base(self):
        ratio, translate = 1.0, 0.0
        for idx in self.indices:
            for j in self.table.classes[idx].base_word:
                m = self.table.system.base_maps[j]
                if not hasattr(m, "ratio"):
                    return None  # smooth base: prefix point not folded here
                translate += ratio * m.translate
                ratio *= m.ratio
        return translate

    def factor(self, m: int) -> ConvolutionFactor:
        """The m-th convolution factor (0-based)."""
        cls = self.table.classes[self.indices[m]]
        scale = self.cum_ratios[m - 1] if m > 0 else 1.0
        return ConvolutionFactor(cls.translates * scale, 1.0 / cls.size)

    def _flat_atoms(self):
        if self._atoms_cache is None:
            parts, offsets = [], [0]
            for m in range(len(self.indices)):
                f = self.factor(m)
                parts.append(f.atoms)
                offsets.append(offsets[-1] + len(f.atoms))
            self._atoms_cache = (np.concatenate(parts), np.array(offsets))
        return self._atoms_cache


def sample_omega(table: ClassTable, length: int, seed: int = 0,
                 stream: int = 0) -> OmegaSample:
    """Draw an i.i.d. class sequence of the given length."""
    if length < 1:
        raise ValidationError("prefix length must be >= 1")
    rng = stream_rng(seed, 0xD15, stream)
    probs = table.weights / table.weights.sum()
    idx = rng.choice(len(table.classes), size=length, p=probs)
    return OmegaSample(table, idx, seed, stream)


def mu_omega_fourier(omega: OmegaSample, xi: float, factors: int | None = None,
                     tol: float | None = None, factor_cap: int = 10_000) -> FourierValue:
    """Evaluate the convolution transform as a finite product of factor sums.

    The tail beyond ``factors`` terms costs at most
    2*pi*|xi| * |prod of used ratios| / (1 - max |class ratio|). When ``tol``
    is given the factor count is raised (up to the prefix length and the
    cap) until the bound is below it; otherwise the achieved bound is
    reported as is.
    """
    if xi == 0:
        return FourierValue(0.0, 1.0 + 0.0j, 0.0)
    limit = min(len(omega), factor_cap)
    r_max = float(np.abs(omega.table.ratios).max())

    def tail(m):
        return TWO_PI * abs(xi) * abs(omega.cum_ratios[m - 1]) / (1.0 - r_max)

    if factors is None:
        if tol is None:
            factors = limit
        else:
            factors = 1
            while factors < limit and tail(factors) > tol:
                factors += 1
    if factors > len(omega):
        raise ValidationError("prefix shorter than the requested factor count")

    flat, offsets = omega._flat_atoms()
    z = character(xi * flat[: offsets[factors]])
    value = 1.0 + 0.0j
    for m in range(factors):
        seg = z[offsets[m]:offsets[m + 1]]
        value *= seg.mean()
    return FourierValue(float(xi), complex(value), tail(factors))


# ---------------------------------------------------------------------------
# disintegration consistency against the direct evaluator
# ---------------------------------------------------------------------------

@dataclass
class ConsistencyEntry:
    frequency: float
    mean: complex
    target: complex
    stderr: float
    z_score: float
    rigorous_error: float
    passed: bool


@dataclass
class ConsistencyReport:
    block_length: int
    n_sequences: int
    entries: list

    @property
    def all_passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_jsonable(self) -> dict:
        return {
            "block_length": self.block_length,
            "n_sequences": self.n_sequences,
            "entries": [
                {"xi": e.frequency, "mean_re": e.mean.real, "mean_im": e.mean.imag,
                 "target_re": e.target.real, "target_im": e.target.imag,
                 "stderr": e.stderr, "z": e.z_score,
                 "rigorous_error": e.rigorous_error, "passed": e.passed}
                for e in self.entries
            ],
        }


def disintegration_consistency(system, block_length: int, xis, n_sequences: int,
                               seed: int = 0, trunc_tol: float = 1e-6,
                               z_pass: float = 4.0) -> ConsistencyReport:
    """Compare the average convolution transform against the direct one.

    For each frequency the mean of the convolution transform over sampled
    class sequences must match the stationary-measure transform within
    ``z_pass`` standard errors plus all rigorous truncation errors. A
    failed comparison is reported, not raised.
    """
    fp = system if isinstance(system, FibreProductCIFS) else fibre_product_from_1d(system)
    table = build_classes(fp, block_length)
    marginal = fp.fibre_cifs()

    xis = np.atleast_1d(np.asarray(xis, dtype=float))
    xi_max = float(np.abs(xis).max())
    r_max = float(np.abs(table.ratios).max())
    # prefix long enough that the truncation tail is below trunc_tol at xi_max
    need = TWO_PI * max(xi_max, 1.0) / ((1.0 - r_max) * trunc_tol)
    length = min(10_000, max(4, math.ceil(math.log(need) / math.log(1.0 / r_max)) + 2))

    omegas = [sample_omega(table, length, seed=seed, stream=i)
              for i in range(n_sequences)]

    entries = []
    for k, xi in enumerate(xis):
        vals = np.empty(n_sequences, dtype=complex)
        rig = 0.0
        for i, om in enumerate(omegas):
            fv = mu_omega_fourier(om, xi, tol=trunc_tol)
            vals[i] = fv.value
            rig = max(rig, fv.error_bound)
        target = fourier_exact(marginal, xi, tol=trunc_tol)
        mean = complex(vals.mean())
        stderr = math.sqrt((vals.real.var(ddof=1) + vals.imag.var(ddof=1)) / n_sequences)
        rigorous = rig + target.error_bound
        gap = abs(mean - target.value)
        z = gap / stderr if stderr > 0 else math.inf if gap > rigorous else 0.0
        entries.append(ConsistencyEntry(float(xi), mean, target.value, stderr,
                                        float(z), rigorous,
                                        bool(gap <= z_pass * stderr + rigorous)))
    return ConsistencyReport(block_length, n_sequences, entries)


# ---------------------------------------------------------------------------
# large-deviation membership
# ---------------------------------------------------------------------------

@dataclass
class LargeDeviationParams:
    """Thresholds controlling typical class sequences.

    Derived from the block length k, the deviation rate alpha, the pair
    weight, the per-letter Lyapunov exponent and the pair translate gap:

      * size_threshold     = 2^(pair_weight * k)
      * count_slack        = e^(-alpha k)   (tolerated fraction of bad slots)
      * ratio_floor        = exp(-e^(3 alpha k / 4))
      * near_integer_tol   = gap * exp(-2 e^(3 alpha k / 4)) / 5
      * log product floor  = -2 * lyapunov * k * N at horizon N
    """

    block_length: int
    alpha: float
    start_index: int
    pair_weight: float
    lyapunov: float
    pair_gap: float

    def __post_init__(self):
        if self.block_length < 1 or self.alpha <= 0 or self.start_index < 1:
            raise ValidationError("need block_length >= 1, alpha > 0, start_index >= 1")

    @classmethod
    def for_table(cls, table: ClassTable, alpha: float,
                  start_index: int = 1) -> "LargeDeviationParams":
        return cls(table.block_length, alpha, start_index,
                   table.pair_weight, table.lyapunov(), table.pair_gap)

    @property
    def size_threshold(self) -> float:
        return 2.0 ** (self.pair_weight * self.block_length)

    @property
    def count_slack(self) -> float:
        return math.exp(-self.alpha * self.block_length)

    @property
    def log_ratio_floor(self) -> float:
        return -math.exp(0.75 * self.alpha * self.block_length)

    @property
    def ratio_floor(self) -> float:
        return math.exp(self.log_ratio_floor)

    @property
    def near_integer_tol(self) -> float:
        return self.pair_gap * math.exp(2.0 * self.log_ratio_floor) / 5.0

    def log_product_floor(self, horizon: int) -> float:
        return -2.0 * self.lyapunov * self.block_length * horizon


@dataclass
class MembershipReport:
    horizons: np.ndarray
    large_classes: np.ndarray      # enough slots with many members
    ratio_product: np.ndarray      # cumulated ratio above the geometric floor
    ratio_floor: np.ndarray        # enough slots with not-too-small ratio
    small_ratio_product: np.ndarray  # tiny-ratio slots contribute little

    @property
    def aggregate(self) -> dict:
        return {
            "large_classes": bool(self.large_classes.all()),
            "ratio_product": bool(self.ratio_product.all()),
            "ratio_floor": bool(self.ratio_floor.all()),
            "small_ratio_product": bool(self.small_ratio_product.all()),
        }

    @property
    def all_ok(self) -> bool:
        return all(self.aggregate.values())


def check_omega_membership(omega: OmegaSample, params: LargeDeviationParams,
                           horizons=None) -> MembershipReport:
    """Evaluate the four membership inequalities at each horizon.

    All four are computed literally from their definitions (in log space
    where products are involved). The aggregate is the conjunction over the
    horizon range.
    """
    if horizons is None:
        horizons = np.arange(params.start_index, len(omega) + 1)
    horizons = np.asarray(horizons, dtype=int)
    if horizons.max() > len(omega):
        raise ValidationError("prefix shorter than the largest horizon")

    table = omega.table
    sizes = table.sizes[omega.indices]
    logr = omega.log_abs_ratios
    big = np.cumsum(sizes > params.size_threshold)
    above_floor = np.cumsum(logr >= params.log_ratio_floor)
    cum_log = np.cumsum(logr)
    small_mask = logr < params.log_ratio_floor
    cum_small_log = np.cumsum(np.where(small_mask, logr, 0.0))

    # class-table expectation of the tiny-ratio log contribution
    sel = np.log(np.abs(table.ratios)) < params.log_ratio_floor
    expect_small = float(np.sum(np.where(sel, table.weights * np.log(np.abs(table.ratios)), 0.0)))

    n = horizons
    need = n * (1.0 - params.count_slack)
    return MembershipReport(
        horizons=n,
        large_classes=big[n - 1] >= need,
        ratio_product=cum_log[n - 1] >
        -2.0 * params.lyapunov * params.block_length * n,
        ratio_floor=above_floor[n - 1] >= need,
        small_ratio_product=cum_small_log[n - 1] >= 2.0 * n * expect_small,
    )


def calibrate_alpha(table: ClassTable, candidates=(0.2, 0.1, 0.05),
                    draws: int = 100_000, seed: int = 0):
    """Pick the largest candidate rate whose block-level concentration
    inequality holds empirically over Monte Carlo draws of classes.

    The inequality: the drawn fraction of classes with at most
    2^(pair_weight*k) members must not exceed e^(-2*alpha*k). Returns the
    chosen alpha and the per-candidate report; when no candidate passes the
    smallest is returned flagged unverified.
    """
    rng = stream_rng(seed, 0xCA11B)
    probs = table.weights / table.weights.sum()
    idx = rng.choice(len(table.classes), size=draws, p=probs)
    sizes = table.sizes[idx]
    k = table.block_length
    small_frac = float(np.mean(sizes <= 2.0 ** (table.pair_weight * k)))
    report = []
    chosen, verified = None, False
    for alpha in sorted(candidates, reverse=True):
        bound = math.exp(-2.0 * alpha * k)
        ok = small_frac <= bound
        report.append({"alpha": alpha, "small_fraction": small_frac,
                       "bound": bound, "holds": ok})
        if ok and chosen is None:
            chosen, verified = alpha, True
    if chosen is None:
        chosen = min(candidates)
    return chosen, {"verified": verified, "candidates": report}


# ---------------------------------------------------------------------------
# near-integer diagnostics for the sparse-frequency counting argument
# ---------------------------------------------------------------------------

@dataclass
class EKDiagnostics:
    """Decay-level bookkeeping for one frequency.

    At each decay level the scaled pair-offset difference splits into an
    integer part and a fractional part in [-1/2, 1/2); levels whose
    fractional part is within ``near_integer_tol`` of zero cannot shrink
    the convolution product and form the near-integer set.
    """

    frequency: float
    band_limit: float
    n_eff: int
    band_index: int
    decay_levels: np.ndarray
    products: np.ndarray
    integer_parts: np.ndarray
    fractional_parts: np.ndarray
    near_integer_tol: float
    near_integer_levels: np.ndarray

    @property
    def level_ratio(self) -> float:
        """Observed n_eff relative to the nominal band index."""
        return self.n_eff / max(self.band_index, 1)


def _round_half_even_keep_halfopen(x: np.ndarray):
    p = np.rint(x)  # ties to even
    eps = x - p
    bump = eps == 0.5  # keep the fractional part inside [-1/2, 1/2)
    p = p + bump
    eps = np.where(bump, -0.5, eps)
    return p.astype(np.int64), eps


def ek_diagnostics(omega: OmegaSample, xi: float, params: LargeDeviationParams,
                   band_limit: float | None = None) -> EKDiagnostics:
    """Compute the near-integer diagnostics of a class sequence at ``xi``.

    ``band_limit`` defaults to max(|xi|, 1). ``n_eff`` is the smallest N
    with band_limit * |product of the first N+1 ratios| < 1.
    """
    T = float(band_limit if band_limit is not None else max(abs(xi), 1.0))
    if T <= 0:
        raise ValidationError("band limit must be positive")
    log_cum = np.cumsum(omega.log_abs_ratios)
    below = np.nonzero(math.log(T) + log_cum < 0.0)[0]
    if len(below) == 0:
        raise ValidationError("prefix too short to absorb the band limit")
    n_eff = max(int(below[0]), 1)  # minimal N with T*|prod_{i<=N+1} r| < 1
    band_index = max(1, math.ceil(math.log(T) /
                                  (2.0 * params.lyapunov * params.block_length)))

    table = omega.table
    idx = omega.indices[:n_eff]
    sizes = table.sizes[idx]
    ratios_ok = omega.log_abs_ratios[:n_eff] >= params.log_ratio_floor
    level_mask = (sizes >= params.size_threshold) & ratios_ok
    levels = np.nonzero(level_mask)[0] + 1  # 1-based positions
    if len(levels) == 0:
        warnings.warn("no decay levels in the prefix; diagnostics are empty")
        empty = np.array([])
        return EKDiagnostics(float(xi), T, n_eff, band_index, empty.astype(int),
                             empty, empty.astype(np.int64), empty,
                             params.near_integer_tol, empty.astype(int))

    deltas = table.pair_deltas[omega.indices[levels - 1]]
    prefix = np.empty(len(levels))
    for j, i in enumerate(levels):
        prefix[j] = omega.cum_ratios[i - 2] if i >= 2 else 1.0
    products = xi * deltas * prefix
    p, eps = _round_half_even_keep_halfopen(products)
    bad = levels[np.abs(eps) <= params.near_integer_tol]
    return EKDiagnostics(float(xi), T, n_eff, band_index, levels, products,
                         p, eps, params.near_integer_tol, bad)


# ---------------------------------------------------------------------------
# circle-sum contraction bound
# ---------------------------------------------------------------------------

def circle_sum_bound(weights, gap: float) -> float:
    """Upper bound for |sum w_i z_i| over unit vectors z_i, valid whenever
    some pair of arguments is at least ``gap`` away from full turns.

    Expanding |sum w_i z_i|^2 = 1 - 2 sum_{i<j} w_i w_j (1 - cos(t_i - t_j))
    and keeping one separated pair gives sqrt(1 - 2 min(w)^2 (1 - cos gap)).
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValidationError("weights must be positive")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValidationError("weights must sum to 1")
    if not 0.0 < gap <= math.pi:
        raise ValidationError("gap must lie in (0, pi]")
    value = 1.0 - 2.0 * float(w.min()) ** 2 * (1.0 - math.cos(gap))
    return math.sqrt(max(value, 0.0))
