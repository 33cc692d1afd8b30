"""Fourier transforms of nonlinear images of stationary measures.

Includes derivative-norm estimation on grids, stopping-word machinery,
polynomial level-set covers, the good/bad frequency-sum split, certified
prefix decompositions via interval arithmetic, and conjugation of affine
systems by smooth coordinate changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .ifs import (CIFS, FibreProductCIFS, AffineMap, SmoothMap, Word,
                  BudgetExhausted, ValidationError, make_word)
from .measure import FourierValue, character, TWO_PI, DEFAULT_BUDGET
from .rng import stream_rng


# ---------------------------------------------------------------------------
# smooth functions on the ambient box
# ---------------------------------------------------------------------------

@dataclass
class SmoothMapF:
    """A C2 function on a box with exact symbolic partials in the last
    (fibre) coordinate."""

    expr: ex.Expr
    domain: dict            # ordered var -> (lo, hi)
    fibre_var: str
    first: ex.Expr = field(init=False, repr=False)
    second: ex.Expr = field(init=False, repr=False)

    def __post_init__(self):
        if self.fibre_var not in self.domain:
            raise ValidationError(f"fibre variable {self.fibre_var!r} not in domain")
        extra = self.expr.variables() - set(self.domain)
        if extra:
            raise ValidationError(f"expression uses unknown variables {sorted(extra)}")
        self.first = self.expr.diff(self.fibre_var)
        self.second = self.first.diff(self.fibre_var)
        self._check_derivatives()

    @classmethod
    def parse(cls, text: str, domain=None, fibre_var: str | None = None) -> "SmoothMapF":
        e = ex.parse(text)
        if domain is None:
            domain = {v: (0.0, 1.0) for v in sorted(e.variables())} or {"x": (0.0, 1.0)}
        if fibre_var is None:
            fibre_var = list(domain)[-1]
        return cls(e, dict(domain), fibre_var)

    def __call__(self, **env):
        return self.expr.eval(env)

    def _check_derivatives(self, points: int = 20, step: float = 1e-5,
                           rel_tol: float = 1e-5, seed: int = 0):
        """Check symbolic partials against central finite differences."""
        rng = stream_rng(seed, 0xD1FF)
        lohi = list(self.domain.items())
        for _ in range(points):
            env = {v: lo + (hi - lo) * (0.1 + 0.8 * rng.random())
                   for v, (lo, hi) in lohi}
            up = dict(env); up[self.fibre_var] += step
            dn = dict(env); dn[self.fibre_var] -= step
            fd = (self.expr.eval(up) - self.expr.eval(dn)) / (2 * step)
            sym = self.first.eval(env)
            scale = max(abs(sym), abs(fd), 1.0)
            if abs(fd - sym) > 2e2 * rel_tol * scale * max(1.0, step / 1e-5):
                raise ValidationError(
                    f"symbolic first partial disagrees with finite differences "
                    f"at {env}: {sym} vs {fd}")
            fd2 = (self.first.eval(up) - self.first.eval(dn)) / (2 * step)
            sym2 = self.second.eval(env)
            scale2 = max(abs(sym2), abs(fd2), 1.0)
            if abs(fd2 - sym2) > 2e2 * rel_tol * scale2:
                raise ValidationError("symbolic second partial disagrees with "
                                      "finite differences")

    def grid(self, resolution: int):
        axes = [np.linspace(lo, hi, resolution + 1) for lo, hi in self.domain.values()]
        mesh = np.meshgrid(*axes, indexing="ij")
        return {v: m.ravel() for v, m in zip(self.domain, mesh)}

    def lipschitz_fibre(self, resolution: int = 1 << 10) -> float:
        env = self.grid(min(resolution, 1 << 12 if len(self.domain) == 1 else 1 << 6))
        return float(np.abs(np.asarray(self.first.eval(env), dtype=float)).max())


def identity_map(var: str = "x") -> SmoothMapF:
    return SmoothMapF(ex.Var(var), {var: (0.0, 1.0)}, var)


# ---------------------------------------------------------------------------
# derivative norms
# ---------------------------------------------------------------------------

@dataclass
class MapNorms:
    """Extrema of the first and second fibre partials over the box.

    ``rigor`` is "grid-estimate" unless a derivative-Lipschitz constant was
    supplied, in which case grid extrema are widened by L*h/2 and the
    result is "certified". ``sign_definite`` records whether the second
    partial kept one strict sign on the grid; when it does not, the
    continuum minimum is 0 and the nonvanishing-curvature hypothesis fails.
    """

    sup_first: float
    sup_second: float
    min_second: float
    rigor: str
    sign_definite: bool

    @property
    def hypothesis_ok(self) -> bool:
        return self.sign_definite and self.min_second > 0.0


def map_norms(F: SmoothMapF, resolution: int = 1 << 8,
              deriv_lipschitz: float | None = None,
              require_curvature: bool = False) -> MapNorms:
    """Grid extrema of |dF/dy| and |d2F/dy2| over the domain box."""
    if resolution < (1 << 8):
        raise ValidationError("grid resolution must be at least 2^8 per axis")
    if (resolution + 1) ** len(F.domain) > (1 << 24):
        raise ValidationError("grid exceeds the 2^24 point cap")
    env = F.grid(resolution)
    d1 = np.abs(np.asarray(F.first.eval(env), dtype=float))
    d2v = np.asarray(F.second.eval(env), dtype=float)
    d2 = np.abs(d2v)
    sign_definite = bool((d2v > 0).all() or (d2v < 0).all())
    sup1, sup2, min2 = float(d1.max()), float(d2.max()), float(d2.min())
    rigor = "grid-estimate"
    if deriv_lipschitz is not None:
        spans = [hi - lo for lo, hi in F.domain.values()]
        h = max(spans) / resolution
        pad = deriv_lipschitz * h / 2.0
        sup1, sup2 = sup1 + pad, sup2 + pad
        min2 = max(min2 - pad, 0.0)
        if min2 == 0.0:
            sign_definite = False
        rigor = "certified"
    if not sign_definite:
        min2 = 0.0
    if require_curvature and not (sign_definite and min2 > 0.0):
        raise ValidationError(
            "second fibre partial changes sign or vanishes on the box; "
            "the nonvanishing-curvature hypothesis fails")
    return MapNorms(sup1, sup2, min2, rigor, sign_definite)


# ---------------------------------------------------------------------------
# stopping-cylinder enumeration
# ---------------------------------------------------------------------------

def _affine_data(cifs: CIFS):
    ratios = cifs.ratios()
    translates = np.array([cifs.maps[a].translate for a in cifs.alphabet])
    weights = cifs.weight_vector()
    return ratios, translates, weights / weights.sum()


def _is_homogeneous(ratios) -> bool:
    return np.max(np.abs(np.abs(ratios) - np.abs(ratios[0]))) < 1e-15


_SUFFIX_DEPTH = 20  # homogeneous anchor tables are cached up to this depth


def _anchors_uniform_depth(cifs: CIFS, depth: int):
    """All composition anchors (images of 0) at a fixed depth, with the
    uniform-depth weights. Cached on the system."""
    def build():
        ratios, translates, weights = _affine_data(cifs)
        anchors = np.array([0.0])
        wts = np.array([1.0])
        for _ in range(depth):
            anchors = (np.multiply.outer(ratios, anchors)
                       + translates[:, None]).ravel()
            wts = np.multiply.outer(weights, wts).ravel()
        return anchors, wts
    return cifs.cache(("anchors", depth), build)


def _accumulate_stopping(cifs: CIFS, threshold: float, budget: int, consume):
    """Drive ``consume(anchors, bound, weights)`` over the stopping set in
    bounded-memory chunks; returns the worst emitted contraction bound.

    Homogeneous systems stop at one uniform depth; a cached suffix anchor
    table is translated under every prefix chunk, so the stopping set is
    never materialised at once. Heterogeneous systems sweep level by level
    and emit words as their composed ratio falls to the threshold.
    """
    ratios, translates, weights = _affine_data(cifs)
    if _is_homogeneous(ratios):
        r = abs(ratios[0])
        depth = max(1, math.ceil(math.log(threshold) / math.log(r)))
        if len(ratios) ** depth > budget:
            reachable = int(math.log(budget) / math.log(len(ratios)))
            raise BudgetExhausted(
                f"homogeneous stopping set of size {len(ratios)}^{depth} "
                f"exceeds the budget {budget}",
                achieved=r ** max(reachable, 1))
        s_depth = min(depth, _SUFFIX_DEPTH)
        suffix, suffix_w = _anchors_uniform_depth(cifs, s_depth)
        rho_total = ratios[0] ** depth
        if depth == s_depth:
            consume(suffix, np.full(len(suffix), rho_total), suffix_w)
            return r ** depth
        # prefix words of the remaining length, one suffix-sized chunk each
        pre_t = np.array([0.0]); pre_rho = np.array([1.0]); pre_w = np.array([1.0])
        for _ in range(depth - s_depth):
            pre_t = (pre_t[None] + pre_rho[None] * translates[:, None]).ravel()
            pre_rho = (pre_rho[None] * ratios[:, None]).ravel()
            pre_w = (pre_w[None] * weights[:, None]).ravel()
        bound = np.full(len(suffix), rho_total)
        for i in range(len(pre_t)):
            consume(pre_t[i] + pre_rho[i] * suffix, bound, pre_w[i] * suffix_w)
        return r ** depth

    worst = 0.0
    rho = np.array([1.0]); t = np.array([0.0]); w = np.array([1.0])
    visits = 0
    while len(rho):
        new_rho = (rho[None, :] * ratios[:, None]).ravel()
        new_t = (t[None, :] + rho[None, :] * translates[:, None]).ravel()
        new_w = (w[None, :] * weights[:, None]).ravel()
        visits += len(new_rho)
        if visits > budget:
            raise BudgetExhausted(f"stopping budget {budget} exhausted",
                                  achieved=float(np.abs(rho).max()))
        done = np.abs(new_rho) <= threshold
        if done.any():
            consume(new_t[done], new_rho[done], new_w[done])
            worst = max(worst, float(np.abs(new_rho[done]).max()))
        rho, t, w = new_rho[~done], new_t[~done], new_w[~done]
    return worst


def _stopping_arrays_product(fp: FibreProductCIFS, threshold: float, budget: int,
                             lip_base: float, lip_fibre: float):
    """Stopping cylinders of an all-affine fibre product.

    A cylinder stops once its anchored character error weight
    lip_base*|base ratio| + lip_fibre*|fibre ratio| drops to the threshold,
    so coordinates the function ignores never force extra depth.
    """
    symbols = fp.alphabet
    rb = np.array([fp.base_map(s).ratio for s in symbols])
    tb = np.array([fp.base_map(s).translate for s in symbols])
    rf = np.array([fp.fibre_map(s).ratio for s in symbols])
    tf = np.array([fp.fibre_map(s).translate for s in symbols])
    wv = np.array([fp.weights[s] for s in symbols])
    wv = wv / wv.sum()

    out = []
    rb_c = np.array([1.0]); tb_c = np.array([0.0])
    rf_c = np.array([1.0]); tf_c = np.array([0.0]); w = np.array([1.0])
    visits = 0
    while len(w):
        nrb = (rb_c[None] * rb[:, None]).ravel()
        ntb = (tb_c[None] + rb_c[None] * tb[:, None]).ravel()
        nrf = (rf_c[None] * rf[:, None]).ravel()
        ntf = (tf_c[None] + rf_c[None] * tf[:, None]).ravel()
        nw = (w[None] * wv[:, None]).ravel()
        visits += len(nw)
        if visits > budget:
            raise BudgetExhausted(f"stopping budget {budget} exhausted")
        bound = lip_base * np.abs(nrb) + lip_fibre * np.abs(nrf)
        done = bound <= threshold
        out.append((ntb[done], ntf[done], bound[done], nw[done]))
        keep = ~done
        rb_c, tb_c, rf_c, tf_c, w = nrb[keep], ntb[keep], nrf[keep], ntf[keep], nw[keep]
    bx = np.concatenate([o[0] for o in out])
    fy = np.concatenate([o[1] for o in out])
    bd = np.concatenate([o[2] for o in out])
    ws = np.concatenate([o[3] for o in out])
    return bx, fy, bd, ws


def pushforward_fourier(F: SmoothMapF, system, xi: float, tol: float = 1e-6,
                        budget: int = DEFAULT_BUDGET,
                        norms: MapNorms | None = None) -> FourierValue:
    """Transform of the image measure F(mu) at ``xi`` by cylinder expansion.

    Each stopping cylinder contributes its weight times the character at
    F(anchor); replacing the cylinder integral costs at most
    2*pi*|xi| * Lip(F) * diameter per unit mass, so stopping at composed
    ratio tol / (2*pi*|xi|*max(1, Lip)) keeps the total error below tol.
    """
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    if xi == 0:
        return FourierValue(0.0, 1.0 + 0.0j, 0.0)
    if norms is None:
        norms = map_norms(F, resolution=1 << 8)
    lip = norms.sup_first
    threshold = tol / (TWO_PI * abs(xi) * max(1.0, lip))

    if isinstance(system, FibreProductCIFS):
        base_affine = all(isinstance(m, AffineMap) for m in system.base_maps.values())
        if not base_affine or len(F.domain) != 2:
            raise ValidationError("fibre-product pushforward needs an affine "
                                  "base and a two-variable function")
        xvar, yvar = list(F.domain)
        env = F.grid(1 << 6)
        lip_base = float(np.abs(np.asarray(F.expr.diff(xvar).eval(env),
                                           dtype=float)).max())
        thr = tol / (TWO_PI * abs(xi))
        bx, fy, bound, w = _stopping_arrays_product(system, thr, budget,
                                                    lip_base, lip)
        vals = np.asarray(F.expr.eval({xvar: bx, yvar: fy}), dtype=float)
        value = complex(np.sum(w * character(xi * vals)))
        err = TWO_PI * abs(xi) * float(np.sum(w * bound))
        return FourierValue(float(xi), value,
                            min(err, tol) + TWO_PI * abs(xi) * system.tail_mass)

    if not system.is_affine:
        return _pushforward_smooth(F, system, xi, tol, budget, lip)
    var = list(F.domain)[0]
    acc = np.zeros((), dtype=complex)

    def consume(anchors, bound, w):
        vals = np.asarray(F.expr.eval({var: anchors}), dtype=float)
        np.add(acc, np.sum(w * character(xi * vals)), out=acc)

    worst = _accumulate_stopping(system, threshold, budget, consume)
    err = TWO_PI * abs(xi) * lip * worst
    return FourierValue(float(xi), complex(acc),
                        min(max(err, 0.0), tol) + TWO_PI * abs(xi) * system.tail_mass)


def _pushforward_smooth(F: SmoothMapF, system: CIFS, xi, tol, budget, lip):
    """Depth-first cylinder walk for systems containing smooth maps; the
    per-prefix diameter bound is diam_constant times the composed
    contraction bound."""
    var = list(F.domain)[0]
    diam0 = system.diam_constant
    threshold = tol / (TWO_PI * abs(xi) * max(1.0, lip) * max(diam0, 1.0))
    symbols = system.alphabet
    visits = 0
    total = 0.0 + 0.0j

    stack = [((), 1.0, 0.0)]  # word, bound, anchor (image of 0)
    while stack:
        word, bound, anchor = stack.pop()
        for s in symbols:
            visits += 1
            if visits > budget:
                raise BudgetExhausted(f"stopping budget {budget} exhausted")
            m = system.maps[s]
            nb = bound * m.contraction_bound
            na = float(m(anchor))
            if nb <= threshold:
                w = math.prod(system.weights[t] for t in word + (s,))
                total += w * complex(character(xi * F.expr.eval({var: na})))
            else:
                stack.append((word + (s,), nb, na))
    err = TWO_PI * abs(xi) * lip * diam0 * threshold
    return FourierValue(float(xi), total, min(err, tol))


# ---------------------------------------------------------------------------
# stopping words at a frequency-power threshold
# ---------------------------------------------------------------------------

@dataclass
class StoppingSet:
    frequency: float
    exponent: float
    words: list  # Word records

    def total_weight(self) -> float:
        return math.fsum(w.weight for w in self.words)


def stopping_words(cifs: CIFS, xi: float, delta: float,
                   budget: int = DEFAULT_BUDGET) -> StoppingSet:
    """The prefix-free words whose composed ratio first drops to
    |xi|^(-delta) or below."""
    if not abs(xi) > 1:
        raise ValidationError("need |xi| > 1")
    if not 0.0 < delta < 1.0:
        raise ValidationError("delta must lie in (0, 1)")
    if not cifs.is_affine:
        raise ValidationError("stopping words need an affine system")
    threshold = abs(xi) ** (-delta)
    ratios, translates, weights = _affine_data(cifs)
    words = []
    stack = [((), 1.0, 0.0, 1.0)]
    visits = 0
    while stack:
        word, rho, t, w = stack.pop()
        for k, s in enumerate(cifs.alphabet):
            visits += 1
            if visits > budget:
                raise BudgetExhausted(f"stopping budget {budget} exhausted")
            nr, nt, nw = rho * ratios[k], t + rho * translates[k], w * weights[k]
            if abs(nr) <= threshold:
                words.append(Word(word + (s,), nr, nt, nw))
            else:
                stack.append((word + (s,), nr, nt, nw))
    words.sort(key=lambda w: w.symbols)
    return StoppingSet(float(xi), float(delta), words)


# ---------------------------------------------------------------------------
# polynomial level-set covers
# ---------------------------------------------------------------------------

@dataclass
class ZeroCover:
    """Roots with multiplicities and a constant C such that small level
    sets {|F| < r} sit inside balls of radius C * r^(1/k) around the roots."""

    zeros: np.ndarray
    multiplicities: np.ndarray
    constant: float
    order: int
    r_max: float
    checked: dict  # r -> bool grid verification


def _poly_derivs(coeffs: np.ndarray, count: int):
    out = [np.asarray(coeffs, dtype=float)]
    for _ in range(count):
        c = out[-1]
        out.append(c[1:] * np.arange(1, len(c)))
    return out


def zero_cover(coeffs, r_list=None, grid: int = 1 << 12) -> ZeroCover:
    """Cover the sublevel sets of a real polynomial on [0, 1].

    Roots come from companion-matrix eigenvalues, clustered, polished by
    bisection where a sign change brackets them; multiplicity at a root is
    the first derivative order that stays away from zero. The constant
    doubles the local-coefficient estimate for slack, and every requested
    radius is verified against a dense grid.
    """
    if isinstance(coeffs, SmoothMapF):
        coeffs = ex.poly_coeffs(coeffs.expr, coeffs.fibre_var)
    if isinstance(coeffs, ex.Expr):
        free = coeffs.variables()
        coeffs = ex.poly_coeffs(coeffs, next(iter(free)) if free else "x")
    coeffs = np.asarray(coeffs, dtype=float)
    if not len(coeffs) or not coeffs.any():
        raise ValidationError("polynomial must not be identically zero")
    if r_list is None:
        r_list = 2.0 ** -np.arange(2, 16)
    r_list = np.asarray(r_list, dtype=float)

    xs = np.linspace(0.0, 1.0, grid + 1)
    vals = np.polyval(coeffs[::-1], xs)
    scale = max(float(np.abs(coeffs).max()), 1e-300)

    degree = len(coeffs) - 1
    if degree == 0:
        roots = np.array([])
    else:
        rts = np.roots(coeffs[::-1])
        real = rts[np.abs(rts.imag) < 1e-7 * max(1.0, np.abs(rts).max())].real
        real = real[(real > -1e-9) & (real < 1 + 1e-9)]
        roots = np.clip(np.sort(real), 0.0, 1.0)

    # cluster near-coincident eigenvalues into single roots
    clusters = []
    for r in roots:
        if clusters and abs(r - clusters[-1][-1]) < 1e-6:
            clusters[-1].append(r)
        else:
            clusters.append([r])
    zeros, mults, local = [], [], []
    derivs = _poly_derivs(coeffs, degree)
    for cl in clusters:
        x0 = float(np.mean(cl))
        # polish with bisection when a sign change brackets the root
        lo, hi = max(0.0, x0 - 1e-3), min(1.0, x0 + 1e-3)
        flo, fhi = np.polyval(coeffs[::-1], lo), np.polyval(coeffs[::-1], hi)
        if flo * fhi < 0:
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                fm = np.polyval(coeffs[::-1], mid)
                if flo * fm <= 0:
                    hi, fhi = mid, fm
                else:
                    lo, flo = mid, fm
            x0 = 0.5 * (lo + hi)
        k = None
        for m in range(1, degree + 1):
            d = np.polyval(derivs[m][::-1], x0) / math.factorial(m) if len(derivs[m]) else 0.0
            if abs(d) > 1e-7 * scale:
                k = m
                break
        if k is None:
            continue  # spurious eigenvalue, no actual vanishing order
        if abs(np.polyval(coeffs[::-1], x0)) > 1e-6 * scale:
            continue  # not a zero on [0,1]
        zeros.append(x0)
        mults.append(k)
        local.append(abs(np.polyval(derivs[k][::-1], x0)) / math.factorial(k))

    zeros = np.asarray(zeros)
    mults = np.asarray(mults, dtype=int)
    if len(zeros) == 0:
        level_floor = float(np.abs(vals).min())
        return ZeroCover(zeros, mults, 0.0, 0, level_floor * (1 - 1e-9),
                         {float(r): True for r in r_list})
    order = int(mults.max())
    constant = 2.0 * max((1.0 / c) ** (1.0 / k) for c, k in zip(local, mults))

    checked = {}
    r_max = 0.0
    for r in sorted(r_list, key=float):
        inside = np.abs(vals) < r
        if inside.any():
            dist = np.min(np.abs(xs[inside][:, None] - zeros[None, :]), axis=1)
            ok = bool((dist <= constant * r ** (1.0 / order)).all())
        else:
            ok = True
        checked[float(r)] = ok
        if ok and r > r_max and all(checked[s] for s in checked if s <= r):
            r_max = float(r)
    return ZeroCover(zeros, mults, constant, order, r_max, checked)


# ---------------------------------------------------------------------------
# good/bad split of the frequency sum
# ---------------------------------------------------------------------------

@dataclass
class SplitFourier:
    good_sum: complex
    bad_sum: complex
    bad_mass: float
    total: complex
    reference: FourierValue
    reconstruction_gap: float
    consistent: bool


def split_fourier(F: SmoothMapF, cifs: CIFS, xi: float, delta: float = 0.2,
                  delta_prime: float | None = None, tol: float = 1e-6,
                  budget: int = DEFAULT_BUDGET) -> SplitFourier:
    """Split the stopping-word sum by proximity to derivative zeros.

    A word is bad when its cylinder image meets a neighbourhood of radius
    C * |xi|^(-delta') around a zero of F' or F''. The two partial sums
    reconstruct the cylinder estimate of the pushforward transform.
    """
    if delta_prime is None:
        delta_prime = delta
    var = F.fibre_var
    zs = []
    for deriv in (F.first, F.second):
        coeffs = ex.poly_coeffs(deriv, var)
        if coeffs.any():
            cover = zero_cover(coeffs, [2.0 ** -6])
            if len(cover.zeros):
                zs.append((cover.zeros, cover.constant))
    radius_by = [(z, c * abs(xi) ** (-delta_prime)) for z, c in zs]

    words = stopping_words(cifs, xi, delta, budget).words
    good = bad = 0.0 + 0.0j
    bad_mass = 0.0
    for w in words:
        lo, hi = sorted((w.translate, w.translate + w.ratio))
        is_bad = any(np.any((z + r >= lo) & (z - r <= hi)) for z, r in radius_by)
        contrib = w.weight * complex(character(xi * F.expr.eval({var: w.translate})))
        if is_bad:
            bad += contrib
            bad_mass += w.weight
        else:
            good += contrib
    reference = pushforward_fourier(F, cifs, xi, tol=tol, budget=budget)
    total = good + bad
    word_err = TWO_PI * abs(xi) * map_norms(F).sup_first * abs(xi) ** (-delta)
    gap = abs(total - reference.value)
    return SplitFourier(good, bad, bad_mass, total, reference, gap,
                        gap <= word_err + reference.error_bound)


# ---------------------------------------------------------------------------
# certified prefix decomposition
# ---------------------------------------------------------------------------

@dataclass
class PrefixDecomposition:
    """An antichain of words whose cylinder boxes certify one strict sign
    of the second fibre partial, plus the mass left uncertified at the
    depth cap."""

    words: list
    covered_mass: float
    uncovered_mass: float
    uncovered_words: int
    depth_cap: int


def _cylinder_box(system, word):
    """Interval (or product-box) image of the full domain under the word."""
    if isinstance(system, FibreProductCIFS):
        bx, fy = (0.0, 1.0), (0.0, 1.0)
        for s in reversed(word):
            bm, fm = system.base_map(s), system.fibre_map(s)
            if isinstance(bm, AffineMap):
                a, b = bm(bx[0]), bm(bx[1])
            else:
                a, b = bm.image(*bx)
            bx = (min(a, b), max(a, b))
            a, b = fm(fy[0]), fm(fy[1])
            fy = (min(a, b), max(a, b))
        return bx, fy
    iv = (0.0, 1.0)
    for s in reversed(word):
        m = system.maps[s]
        if isinstance(m, AffineMap):
            a, b = m(iv[0]), m(iv[1])
        else:
            a, b = m.image(*iv)
        iv = (min(a, b), max(a, b))
    return (iv,)


def prefix_decomposition(F: SmoothMapF, system, depth_cap: int = 12,
                         budget: int = 200_000) -> PrefixDecomposition:
    """Find minimal prefixes whose cylinder box certifies nonvanishing
    second fibre partial by natural interval extension.

    Words deeper than the cap contribute to the uncovered mass. The
    certified words form a prefix-free family by construction (a word is
    only expanded when its own box fails to certify).
    """
    names = list(F.domain)
    if isinstance(system, FibreProductCIFS):
        symbols = system.alphabet
        weight = lambda s: system.weights[s]
        if len(names) != 2:
            raise ValidationError("fibre-product decomposition needs a "
                                  "two-variable function")
    else:
        symbols = system.alphabet
        weight = lambda s: system.weights[s]
        if len(names) != 1:
            raise ValidationError("line-system decomposition needs a "
                                  "one-variable function")

    def certifies(box_parts) -> bool:
        box = {v: iv for v, iv in zip(names, box_parts)}
        lo, hi = F.second.interval(box)
        return lo > 0.0 or hi < 0.0

    certified, covered = [], 0.0
    uncovered, n_uncovered = 0.0, 0
    queue = [((), 1.0)]
    visits = 0
    while queue:
        word, mass = queue.pop()
        visits += 1
        if visits > budget:
            raise BudgetExhausted(f"prefix budget {budget} exhausted")
        if certifies(_cylinder_box(system, word)):
            certified.append(word)
            covered += mass
        elif len(word) >= depth_cap:
            uncovered += mass
            n_uncovered += 1
        else:
            for s in symbols:
                queue.append((word + (s,), mass * weight(s)))
    certified.sort()
    return PrefixDecomposition(certified, covered, uncovered, n_uncovered, depth_cap)


# ---------------------------------------------------------------------------
# conjugation by a smooth coordinate change
# ---------------------------------------------------------------------------

def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance between empirical laws."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    both = np.concatenate([a, b])
    ca = np.searchsorted(a, both, side="right") / len(a)
    cb = np.searchsorted(b, both, side="right") / len(b)
    return float(np.abs(ca - cb).max())


@dataclass
class ConjugacyResult:
    system: CIFS
    ks_statistic: float | None


def conjugate_ifs(psi: CIFS, forward: SmoothMapF, inverse: ex.Expr | str,
                  verify: bool = True, draws: int = 100_000,
                  ks_tol: float = 0.02, seed: int = 0) -> ConjugacyResult:
    """Conjugate an affine system by a strictly monotone coordinate change.

    Each map becomes forward o psi_a o inverse as a composed expression;
    compositions that simplify to degree-one polynomials are returned as
    affine maps. When ``verify`` is set, samples of the original measure
    pushed through ``forward`` are compared against samples of the
    conjugated system with a two-sample KS test.
    """
    from .measure import sample_points  # local import to avoid a cycle

    if not psi.is_affine:
        raise ValidationError("conjugation starts from an affine system")
    var = forward.fibre_var
    inv = ex.parse(inverse) if isinstance(inverse, str) else inverse
    inv_vars = inv.variables()
    if len(inv_vars) > 1:
        raise ValidationError("inverse expression must use one variable")
    inv_var = next(iter(inv_vars)) if inv_vars else var

    grid = np.linspace(0.0, 1.0, 1 << 10)
    fvals = np.asarray(forward.expr.eval({var: grid}), dtype=float)
    diffs = np.diff(fvals)
    if not ((diffs > 0).all() or (diffs < 0).all()):
        raise ValidationError("coordinate change is not strictly monotone on [0,1]")
    check = np.linspace(0.0, 1.0, 100)
    inv_vals = np.asarray(inv.eval({inv_var: check}), dtype=float)
    round_trip = np.asarray(forward.expr.eval({var: inv_vals}), dtype=float)
    if np.abs(round_trip - check).max() > 1e-9:
        raise ValidationError("inverse expression fails the round-trip identity")

    if isinstance(forward.expr, ex.Var):
        return ConjugacyResult(psi, None if not verify else 0.0)

    lip = forward.lipschitz_fibre()
    maps, star = {}, {}
    for a in psi.alphabet:
        m = psi.maps[a]
        mid = ex.add(ex.mul(m.ratio, inv.subst({inv_var: ex.Var(var)})), m.translate)
        comp = forward.expr.subst({var: mid})
        try:
            coeffs = ex.poly_coeffs(comp, var)
            if len(coeffs) <= 2:
                maps[a] = AffineMap(float(coeffs[1]) if len(coeffs) > 1 else 0.0,
                                    float(coeffs[0]))
                continue
        except ex.ExprError:
            pass
        maps[a] = SmoothMap(comp, var, (0.0, 1.0),
                            contraction_bound=abs(m.ratio), bound_kind="declared")
    conjugated = CIFS(psi.alphabet, maps, dict(psi.weights), dim=1,
                      tail_mass=psi.tail_mass, diam_constant=max(lip, 1.0))

    ks = None
    if verify:
        src = sample_points(psi, draws, tol=1e-9, seed=seed, stream=1).points
        pushed = np.asarray(forward.expr.eval({var: src}), dtype=float)
        direct = sample_points(conjugated, draws, tol=1e-9, seed=seed, stream=2).points
        ks = ks_distance(pushed, direct)
        if ks > ks_tol:
            raise ValidationError(
                f"conjugacy verification failed: KS distance {ks:.4f} > {ks_tol}")
    return ConjugacyResult(conjugated, ks)
