"""Contraction maps, (countable) iterated function systems, fibre products.

Countable alphabets are represented by a finite truncation whose omitted
mass is recorded in ``tail_mass`` and propagated into downstream error
bounds. All objects are immutable after construction and safe to share
across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex

WEIGHT_TOL = 1e-12
RATIO_MATCH_TOL = 1e-12
GRID_RESOLUTION = 1 << 12  # grid used to certify smooth contractions


class ValidationError(ValueError):
    """An input violates a structural precondition."""


class SeparationError(ValidationError):
    """No separated pair of fibre maps could be located."""


class BudgetExhausted(RuntimeError):
    """An enumeration exceeded its work budget."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineMap:
    """x -> ratio * x + translate on the line."""

    ratio: float
    translate: float

    def __call__(self, x):
        return self.ratio * x + self.translate

    @property
    def contraction_bound(self) -> float:
        return abs(self.ratio)

    @property
    def is_contraction(self) -> bool:
        return 0.0 < abs(self.ratio) < 1.0

    def fixed_point(self) -> float:
        if self.ratio == 1.0:
            raise ValidationError("identity-slope map has no unique fixed point")
        return self.translate / (1.0 - self.ratio)

    def image(self, lo: float = 0.0, hi: float = 1.0) -> tuple:
        a, b = self(lo), self(hi)
        return (a, b) if a <= b else (b, a)

    def after(self, other: "AffineMap") -> "AffineMap":
        """Composition self(other(x))."""
        return AffineMap(self.ratio * other.ratio,
                         self.translate + self.ratio * other.translate)

    def to_expr(self, var: str = "x") -> ex.Expr:
        return ex.add(ex.mul(self.ratio, ex.Var(var)), self.translate)


@dataclass(frozen=True)
class SmoothMap:
    """A C2 self-map of an interval given by an expression tree.

    ``contraction_bound`` is either certified from a derivative grid bound
    plus a declared derivative-Lipschitz slack (bound_kind="grid"), or
    supplied by the caller for maps known to contract only in a conjugated
    coordinate (bound_kind="declared").
    """

    expr: ex.Expr
    var: str
    domain: tuple = (0.0, 1.0)
    contraction_bound: float = 1.0
    bound_kind: str = "grid"
    derivative: ex.Expr = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "derivative", self.expr.diff(self.var))

    def __call__(self, x):
        return self.expr.eval({self.var: x})

    @property
    def is_contraction(self) -> bool:
        return self.contraction_bound < 1.0

    def image(self, lo: float | None = None, hi: float | None = None) -> tuple:
        """Interval-extension image, clipped to the domain."""
        if lo is None:
            lo, hi = self.domain
        a, b = self.expr.interval({self.var: (lo, hi)})
        return (max(a, self.domain[0]), min(b, self.domain[1]))

    @classmethod
    def from_expr(cls, expression: ex.Expr | str, var: str = "x",
                  domain: tuple = (0.0, 1.0), deriv_lipschitz: float = 0.0,
                  declared_bound: float | None = None,
                  grid: int = GRID_RESOLUTION) -> "SmoothMap":
        """Build and validate a smooth contraction.

        Without ``declared_bound`` the map must provably contract: the grid
        bound on |f'| plus the declared derivative-Lipschitz slack must stay
        below 1, and grid evaluations must land inside the domain.
        """
        e = ex.parse(expression) if isinstance(expression, str) else expression
        free = e.variables()
        if free - {var}:
            raise ValidationError(f"map uses variables {sorted(free)} besides {var!r}")
        if declared_bound is not None:
            if not 0.0 < declared_bound < 1.0:
                raise ValidationError("declared contraction bound must lie in (0,1)")
            return cls(e, var, domain, float(declared_bound), "declared")
        lo, hi = domain
        xs = np.linspace(lo, hi, grid + 1)
        vals = np.asarray(e.eval({var: xs}), dtype=float)
        pad = 1e-9
        if vals.min() < lo - pad or vals.max() > hi + pad:
            raise ValidationError("map does not send its domain box into itself")
        h = (hi - lo) / grid
        dbound = float(np.abs(np.asarray(e.diff(var).eval({var: xs}), dtype=float)).max())
        dbound += deriv_lipschitz * h / 2.0
        if dbound >= 1.0:
            raise ValidationError(f"certified Lipschitz bound {dbound:.6f} is not < 1")
        return cls(e, var, domain, dbound, "grid")


Map1D = AffineMap | SmoothMap


@dataclass(frozen=True)
class ProductMap:
    """A map of a product box: base on the first block, affine on the fibre."""

    base: Map1D
    fibre: AffineMap

    def __call__(self, point):
        x, y = point
        return (self.base(x), self.fibre(y))

    @property
    def contraction_bound(self) -> float:
        return max(self.base.contraction_bound, self.fibre.contraction_bound)


# ---------------------------------------------------------------------------
# words
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Word:
    """A finite composition word with its derived closed-form data.

    ``ratio`` multiplies member ratios left to right; ``translate`` is the
    composed offset (affine words only, else None); ``weight`` multiplies
    member weights. The empty word composes to the identity, which is
    flagged by ``is_contraction`` being False.
    """

    symbols: tuple
    ratio: float
    translate: float | None
    weight: float

    def __len__(self):
        return len(self.symbols)

    @property
    def is_contraction(self) -> bool:
        return abs(self.ratio) < 1.0


# ---------------------------------------------------------------------------
# one-dimensional systems
# ---------------------------------------------------------------------------

@dataclass
class CIFS:
    """A finite (possibly truncated-countable) system of 1-D contractions.

    ``tail_mass`` records the weight of omitted symbols for truncations of
    countable systems; weights must sum to 1 - tail_mass. ``diam_constant``
    scales composed contraction bounds into image-diameter bounds, which
    matters for declared-bound (conjugated) systems.
    """

    alphabet: tuple
    maps: dict
    weights: dict
    dim: int = 1
    tail_mass: float = 0.0
    diam_constant: float = 1.0

    def __post_init__(self):
        self.alphabet = tuple(self.alphabet)
        if not self.alphabet:
            raise ValidationError("empty alphabet")
        missing = [a for a in self.alphabet if a not in self.maps or a not in self.weights]
        if missing:
            raise ValidationError(f"symbols without map or weight: {missing[:4]}")
        for a in self.alphabet:
            w = self.weights[a]
            if not (w > 0.0):
                raise ValidationError(f"weight of {a!r} must be positive, got {w}")
        total = math.fsum(self.weights[a] for a in self.alphabet)
        if abs(total - (1.0 - self.tail_mass)) > WEIGHT_TOL:
            raise ValidationError(
                f"weights sum to {total!r}, expected {1.0 - self.tail_mass!r}")
        worst = max(self.maps[a].contraction_bound for a in self.alphabet)
        if worst >= 1.0:
            raise ValidationError(f"uniform contraction fails: sup bound {worst}")
        self._caches = {}

    # -- helpers ------------------------------------------------------------

    @property
    def is_affine(self) -> bool:
        return all(isinstance(self.maps[a], AffineMap) for a in self.alphabet)

    @property
    def max_contraction(self) -> float:
        return max(self.maps[a].contraction_bound for a in self.alphabet)

    def ratios(self) -> np.ndarray:
        if not self.is_affine:
            raise ValidationError("ratios are defined for affine systems only")
        return np.array([self.maps[a].ratio for a in self.alphabet])

    def weight_vector(self) -> np.ndarray:
        return np.array([self.weights[a] for a in self.alphabet])

    def cache(self, key, build):
        try:
            return self._caches[key]
        except KeyError:
            self._caches[key] = value = build()
            return value


def make_word(cifs: CIFS, symbols: Sequence) -> Word:
    """Validate symbols against the alphabet and fold the derived data."""
    ratio, weight = 1.0, 1.0
    translate: float | None = 0.0
    for idx, s in enumerate(symbols):
        if s not in cifs.maps:
            raise ValidationError(f"unknown symbol {s!r} at index {idx}")
        m = cifs.maps[s]
        weight *= cifs.weights[s]
        if isinstance(m, AffineMap) and translate is not None:
            translate += ratio * m.translate
            ratio *= m.ratio
        else:
            if translate is not None:  # switch to bound mode
                translate = None
                ratio = abs(ratio)
            ratio *= m.contraction_bound
    if len(symbols) == 0:
        weight = 1.0
    return Word(tuple(symbols), ratio, translate, weight)


def compose(cifs: CIFS, symbols: Sequence) -> Map1D:
    """Left-to-right composition of the maps named by ``symbols``.

    The empty word yields the identity, returned as an affine map with
    ratio 1 (``is_contraction`` is False).
    """
    word = make_word(cifs, symbols)
    if word.translate is not None:
        return AffineMap(word.ratio, word.translate)
    # mixed/smooth: build the composed expression right-to-left
    var = next(cifs.maps[s].var for s in symbols if isinstance(cifs.maps[s], SmoothMap))
    inner = cifs.maps[tuple(symbols)[-1]]
    domain = inner.domain if isinstance(inner, SmoothMap) else (0.0, 1.0)
    tree: ex.Expr = ex.Var(var)
    for s in reversed(tuple(symbols)):
        m = cifs.maps[s]
        if isinstance(m, AffineMap):
            tree = ex.add(ex.mul(m.ratio, tree), m.translate)
        else:
            tree = m.expr.subst({m.var: tree})
    return SmoothMap(tree, var, domain, min(word.ratio, 1.0 - 1e-15), "declared")


@dataclass
class TailCheck:
    value: float
    finite: bool
    exact: bool


def tail_check(system, tau: float, declared_tail: float = 0.0) -> TailCheck:
    """Sum of weight * bound^(-tau) over the (possibly truncated) alphabet.

    For truncated countable systems ``declared_tail`` is an upper bound on
    the omitted part of the sum, added to the returned value.
    """
    if not tau > 0.0:
        raise ValidationError(f"tau must be positive, got {tau}")
    if isinstance(system, FibreProductCIFS):
        pairs = [(system.weights[s], abs(system.fibre_map(s).ratio))
                 for s in system.alphabet]
    else:
        pairs = [(system.weights[a], system.maps[a].contraction_bound)
                 for a in system.alphabet]
    value = math.fsum(w * b ** (-tau) for w, b in pairs) + declared_tail
    exact = declared_tail == 0.0 and getattr(system, "tail_mass", 0.0) == 0.0
    return TailCheck(value, math.isfinite(value), exact)


def lyapunov(system) -> float:
    """Weight-averaged log inverse contraction ratio.

    Uses fibre ratios for fibre products and all map ratios for 1-D affine
    systems. Smooth maps carry no single ratio and are rejected.
    """
    if isinstance(system, FibreProductCIFS):
        pairs = [(system.weights[s], abs(system.fibre_map(s).ratio))
                 for s in system.alphabet]
    else:
        if not system.is_affine:
            raise ValidationError("Lyapunov exponent needs affine ratios")
        pairs = [(system.weights[a], abs(system.maps[a].ratio))
                 for a in system.alphabet]
    total = math.fsum(w for w, _ in pairs)
    return math.fsum(w * math.log(1.0 / r) for w, r in pairs) / total


# ---------------------------------------------------------------------------
# fibre products
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeparatedPair:
    """Two fibre maps in one family with equal ratio and weight whose unit
    interval images are disjoint; ``gap`` is the translate difference."""

    base_id: object
    fibre_a: object
    fibre_b: object
    ratio: float
    weight: float
    gap: float
    fold: int  # how many letters of the original system one symbol packs


@dataclass
class FibreProductCIFS:
    """Base contractions paired with affine fibre families on the last axis.

    Symbols are pairs (base_id, fibre_id); the product map acts on
    [0,1]^(d+1) as (base on the first block, fibre on the last coordinate).
    """

    base_maps: dict
    fibre_maps: dict   # base_id -> {fibre_id: AffineMap}
    weights: dict      # (base_id, fibre_id) -> weight
    pair: SeparatedPair
    dim: int = 1
    fold: int = 1
    tail_mass: float = 0.0

    def __post_init__(self):
        alphabet = []
        for j, fam in self.fibre_maps.items():
            if j not in self.base_maps:
                raise ValidationError(f"fibre family {j!r} has no base map")
            for l in fam:
                if (j, l) not in self.weights:
                    raise ValidationError(f"missing weight for {(j, l)!r}")
                alphabet.append((j, l))
        self.alphabet = tuple(alphabet)
        total = math.fsum(self.weights[s] for s in self.alphabet)
        if abs(total - (1.0 - self.tail_mass)) > WEIGHT_TOL:
            raise ValidationError(f"weights sum to {total!r}")
        worst = max(self.product_map(s).contraction_bound for s in self.alphabet)
        if worst >= 1.0:
            raise ValidationError(f"uniform contraction fails: sup bound {worst}")
        self._validate_pair()
        self._caches = {}

    def _validate_pair(self):
        p = self.pair
        ga = self.fibre_maps[p.base_id][p.fibre_a]
        gb = self.fibre_maps[p.base_id][p.fibre_b]
        if abs(ga.ratio - gb.ratio) > RATIO_MATCH_TOL:
            raise ValidationError("separated pair ratios differ")
        wa, wb = self.weights[(p.base_id, p.fibre_a)], self.weights[(p.base_id, p.fibre_b)]
        if abs(wa - wb) > WEIGHT_TOL:
            raise ValidationError("separated pair weights differ")
        (alo, ahi), (blo, bhi) = ga.image(), gb.image()
        if not (ahi < blo or bhi < alo):
            raise ValidationError("separated pair images are not disjoint")
        if abs(abs(gb.translate - ga.translate) - p.gap) > 1e-9:
            raise ValidationError("recorded translate gap is inconsistent")

    # -- accessors ----------------------------------------------------------

    def base_map(self, symbol) -> Map1D:
        return self.base_maps[symbol[0]]

    def fibre_map(self, symbol) -> AffineMap:
        return self.fibre_maps[symbol[0]][symbol[1]]

    def product_map(self, symbol) -> ProductMap:
        return ProductMap(self.base_map(symbol), self.fibre_map(symbol))

    @property
    def special_symbols(self) -> tuple:
        p = self.pair
        return ((p.base_id, p.fibre_a), (p.base_id, p.fibre_b))

    @property
    def pair_weight(self) -> float:
        return self.pair.weight

    @property
    def pair_gap(self) -> float:
        return self.pair.gap

    def fibre_cifs(self) -> CIFS:
        """The last-coordinate marginal: all fibre maps with their weights.

        The last coordinate evolves autonomously under the product system,
        so its marginal law is the stationary measure of this 1-D system.
        """
        def build():
            maps = {s: self.fibre_map(s) for s in self.alphabet}
            weights = {s: self.weights[s] for s in self.alphabet}
            return CIFS(self.alphabet, maps, weights, dim=1, tail_mass=self.tail_mass)
        return self.cache("fibre_cifs", build)

    def lyapunov(self) -> float:
        return lyapunov(self)

    def cache(self, key, build):
        try:
            return self._caches[key]
        except KeyError:
            self._caches[key] = value = build()
            return value


def _fold_affine(maps: Sequence[AffineMap]) -> AffineMap:
    out = AffineMap(1.0, 0.0)
    for m in maps:
        out = out.after(m)
    return out


def _fold_base(maps: Sequence[Map1D]):
    if all(isinstance(m, AffineMap) for m in maps):
        return _fold_affine(maps)
    # smooth bases compose by expression substitution
    var = next(m.var for m in maps if isinstance(m, SmoothMap))
    tree: ex.Expr = ex.Var(var)
    bound = 1.0
    for m in reversed(tuple(maps)):
        outer = m.to_expr(var) if isinstance(m, AffineMap) else m.expr
        v = var if isinstance(m, AffineMap) else m.var
        tree = outer.subst({v: tree})
        bound *= m.contraction_bound
    return SmoothMap(tree, var, (0.0, 1.0), min(bound, 1 - 1e-15), "declared")


def _search_pair(fibre_maps, weights, fold):
    """Look for two fibre maps in one family with matching ratio and weight
    and disjoint unit-interval images; prefer the widest translate gap."""
    best = None
    for j, fam in fibre_maps.items():
        items = sorted(fam.items(), key=lambda kv: (kv[1].translate, repr(kv[0])))
        for i, (la, ma) in enumerate(items):
            for lb, mb in items[i + 1:]:
                if abs(ma.ratio - mb.ratio) > RATIO_MATCH_TOL:
                    continue
                if abs(weights[(j, la)] - weights[(j, lb)]) > WEIGHT_TOL:
                    continue
                (alo, ahi), (blo, bhi) = ma.image(), mb.image()
                if ahi < blo or bhi < alo:
                    gap = abs(mb.translate - ma.translate)
                    cand = SeparatedPair(j, la, lb, ma.ratio,
                                         weights[(j, la)], gap, fold)
                    if best is None or cand.gap > best.gap:
                        best = cand
    return best


def build_fibre_product(base_maps: Mapping, fibre_maps: Mapping, weights: Mapping,
                        dim: int = 1, n_max: int = 8,
                        alphabet_budget: int = 100_000) -> FibreProductCIFS:
    """Assemble and validate a fibre product system.

    If no fibre family already contains a separated pair, the system is
    replaced by its n-fold composition for the smallest n <= n_max at which
    a pair of composed fibre maps (sharing a base word) has equal ratio and
    weight and disjoint images; that n is recorded on the pair.
    """
    base_maps = dict(base_maps)
    fibre_maps = {j: dict(fam) for j, fam in fibre_maps.items()}
    weights = dict(weights)

    nontrivial = False
    for j, fam in fibre_maps.items():
        fps = {round(m.fixed_point(), 12) for m in fam.values()}
        if len(fps) > 1:
            nontrivial = True
    if not nontrivial:
        raise ValidationError("every fibre family has a common fixed point "
                              "(singleton attractors); no fibre product exists")

    symbols = [(j, l) for j, fam in fibre_maps.items() for l in fam]
    for n in range(1, n_max + 1):
        if len(symbols) ** n > alphabet_budget:
            raise BudgetExhausted(
                f"{len(symbols)}^{n} composed symbols exceed the alphabet budget")
        if n == 1:
            b_maps, f_maps, w = base_maps, fibre_maps, weights
        else:
            b_maps, f_maps, w = {}, {}, {}
            for word in iproduct(symbols, repeat=n):
                base_word = tuple(s[0] for s in word)
                if base_word not in b_maps:
                    b_maps[base_word] = _fold_base([base_maps[j] for j in base_word])
                    f_maps[base_word] = {}
                f_maps[base_word][word] = _fold_affine(
                    [fibre_maps[s[0]][s[1]] for s in word])
                w[(base_word, word)] = math.prod(weights[s] for s in word)
        pair = _search_pair(f_maps, w, n)
        if pair is not None:
            return FibreProductCIFS(b_maps, f_maps, w, pair, dim=dim, fold=n)
    raise SeparationError(
        f"no separated pair of fibre maps up to {n_max}-fold composition")


def fibre_product_from_1d(cifs: CIFS, n_max: int = 8,
                          alphabet_budget: int = 100_000) -> FibreProductCIFS:
    """Wrap a 1-D affine system as a fibre product over a dummy base x/2.

    The product's stationary measure is (Dirac at 0) x (the 1-D measure),
    so all fibre-side machinery applies unchanged to plain line systems.
    """
    if not cifs.is_affine:
        raise ValidationError("only affine 1-D systems can be wrapped")
    base = {0: AffineMap(0.5, 0.0)}
    fibres = {0: {a: cifs.maps[a] for a in cifs.alphabet}}
    weights = {(0, a): cifs.weights[a] for a in cifs.alphabet}
    return build_fibre_product(base, fibres, weights, dim=1,
                               n_max=n_max, alphabet_budget=alphabet_budget)


# ---------------------------------------------------------------------------
# ready-made systems used throughout tests and docs
# ---------------------------------------------------------------------------

def cantor_system() -> CIFS:
    """Middle-thirds system {x/3, (x+2)/3} with equal weights."""
    maps = {0: AffineMap(1 / 3, 0.0), 1: AffineMap(1 / 3, 2 / 3)}
    return CIFS((0, 1), maps, {0: 0.5, 1: 0.5})


def dyadic_uniform_system() -> CIFS:
    """{x/2, (x+1)/2} with equal weights; its stationary measure is Lebesgue."""
    maps = {0: AffineMap(0.5, 0.0), 1: AffineMap(0.5, 0.5)}
    return CIFS((0, 1), maps, {0: 0.5, 1: 0.5})
