"""Muckenhoupt-type weight constants over a finite basis, and power weights.

All constants are exact finite maxima over the sets of the basis. Exponents
follow the reciprocal convention of :mod:`rdfextrap.spaces`: the averages in
``[w]_{p,(r,s)}`` use exponents ``1/(1/r - 1/p)`` on ``w^{-1}`` and
``1/(1/p - 1/s)`` on ``w``; a zero reciprocal means a maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate

from .lattice import Basis, Grid
from .maximal import maximal
from .spaces import recip


def _check_weight(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if not (np.all(np.isfinite(w)) and np.all(w > 0)):
        raise ValueError("weights must be finite and strictly positive")
    return w


def _avg_recip(basis: Basis, f, t: float) -> np.ndarray:
    """``<f>_{1/t,E}`` for all E, with ``t = 0`` meaning the maximum."""
    if t < -1e-15:
        raise ValueError("negative averaging exponent")
    if t <= 1e-15:
        return basis.averages(f, np.inf)
    return basis.averages(f, 1.0 / t)


def _check_exponents(p: float, r: float, s: float):
    ip, ir, is_ = recip(p), recip(r), recip(s)
    if not (ir >= ip - 1e-15 and ip >= is_ - 1e-15):
        raise ValueError(f"need r <= p <= s, got p={p}, r={r}, s={s}")
    return ip, ir, is_


def aprs_products(w, p: float, r: float, s: float, basis: Basis) -> np.ndarray:
    """Per-set values ``<w^{-1}>_{1/(1/r-1/p),E} <w>_{1/(1/p-1/s),E}``."""
    w = _check_weight(w)
    ip, ir, is_ = _check_exponents(p, r, s)
    return _avg_recip(basis, 1.0 / w, ir - ip) * _avg_recip(basis, w, ip - is_)


def aprs_constant(w, p: float, r: float = 1.0, s: float = np.inf, basis: Basis | None = None) -> float:
    """``[w]_{p,(r,s)}`` over ``basis``; the default ``(r, s) = (1, inf)`` is ``[w]_p``."""
    if basis is None:
        raise ValueError("a basis is required")
    return float(aprs_products(w, p, r, s, basis).max())


def ap_constant(w, p: float, basis: Basis) -> float:
    return aprs_constant(w, p, 1.0, np.inf, basis)


def a1_constant(w, basis: Basis) -> float:
    """Least C with ``M w <= C w`` pointwise."""
    w = _check_weight(w)
    return float(np.max(maximal(w, basis) / w))


def ainf_constant(w, basis: Basis) -> float:
    """``[w]_inf = [w^{-1}]_1``."""
    return a1_constant(1.0 / _check_weight(w), basis)


def fujii_wilson_constant(w, basis: Basis) -> float:
    """``sup_E <M_E w>_{1,E} / <w>_{1,E}`` with ``M_E`` localised to sets inside E."""
    w = _check_weight(w)
    avgs = basis.averages(w, 1.0)
    cont = basis.containment
    best = 0.0
    for i, cells in enumerate(basis._member_lists):
        inside = np.flatnonzero(cont[i])
        sub = basis.incidence[np.ix_(inside, cells)]
        local = np.where(sub, avgs[inside][:, None], 0.0).max(axis=0)
        best = max(best, float(local.mean() / avgs[i]))
    return best


def symmetric_exponent(p: float, r: float, s: float) -> float:
    """``p~`` with ``[w]_{p,(r,s)} = [w^{-1}]_{p~,(r,s)}``: ``1/p~ = 1/r + 1/s - 1/p``."""
    return 1.0 / (recip(r) + recip(s) - recip(p))


def reverse_holder_constant(w, p: float, r: float, s: float, basis: Basis) -> float:
    """Best constant C with ``<w>_{1/(1/p-1/s),E} <= C <w>_{p,E}`` over E.

    This is the reverse Hölder constant of the two-sided comparison
    ``max(C, [w]_{p,(r,inf)}) <= [w]_{p,(r,s)} <= C [w]_{p,(r,inf)}``.
    """
    w = _check_weight(w)
    ip = recip(p)
    is_ = recip(s)
    return float(np.max(_avg_recip(basis, w, ip - is_) / _avg_recip(basis, w, ip)))


# ---------------------------------------------------------------------------
# off-diagonal parameters


@dataclass(frozen=True)
class OffDiagParams:
    """Exponent tuple of the off-diagonal two-weight setting, stored as reciprocals.

    Attributes ``ip1, ip2, ir1, ir2, is1, is2`` are ``1/p_1`` and so on;
    ``alpha = 1/p_2 - 1/p_1``.
    """

    ip1: float
    ip2: float
    ir1: float
    ir2: float
    is1: float
    is2: float
    tol: float = 1e-12

    def __post_init__(self):
        a = self.alpha
        if abs((self.ir2 - self.ir1) - a) > self.tol or abs((self.is2 - self.is1) - a) > self.tol:
            raise ValueError("need 1/r2 - 1/r1 = 1/s2 - 1/s1 = 1/p2 - 1/p1")
        if a > self.tol:
            raise ValueError("only p2 >= p1 is supported (1/p2 - 1/p1 <= 0)")
        if self.is1 < -self.tol:
            raise ValueError("1/s1 must be nonnegative")
        for ip, ir, is_ in ((self.ip1, self.ir1, self.is1), (self.ip2, self.ir2, self.is2)):
            if not (is_ - self.tol <= ip <= ir + self.tol):
                raise ValueError("need 1/s_j <= 1/p_j <= 1/r_j")
        if not self.ir1 > self.is1:
            raise ValueError("need 1/r1 > 1/s1")

    @property
    def alpha(self) -> float:
        return self.ip2 - self.ip1

    @classmethod
    def from_exponents(cls, p1, p2, r1, r2, s1, s2) -> OffDiagParams:
        return cls(recip(p1), recip(p2), recip(r1), recip(r2), recip(s1), recip(s2))

    @classmethod
    def full_range(cls, p1: float, p2: float) -> OffDiagParams:
        """The Riesz-potential regime ``r_1 = 1``, ``s_2 = inf``."""
        gap = recip(p1) - recip(p2)
        return cls(recip(p1), recip(p2), 1.0, 1.0 - gap, gap, 0.0)

    @classmethod
    def diagonal(cls, p: float, r: float, s: float) -> OffDiagParams:
        return cls(recip(p), recip(p), recip(r), recip(r), recip(s), recip(s))

    @property
    def gap(self) -> float:
        """``1/r_1 - 1/s_1 = 1/r_2 - 1/s_2``."""
        return self.ir1 - self.is1

    def describe(self) -> dict:
        return {k: getattr(self, k) for k in ("ip1", "ip2", "ir1", "ir2", "is1", "is2", "alpha")}


def two_weight_offdiag_constant(w1, w2, params: OffDiagParams, basis: Basis) -> float:
    """``sup_E <w1^{-1}>_{1/(1/r1-1/p1),E} <w2>_{1/(1/p2-1/s2),E}``."""
    w1 = _check_weight(w1)
    w2 = _check_weight(w2)
    a = _avg_recip(basis, 1.0 / w1, params.ir1 - params.ip1)
    b = _avg_recip(basis, w2, params.ip2 - params.is2)
    return float(np.max(a * b))


def offdiag_constant(w, params: OffDiagParams, basis: Basis) -> float:
    return two_weight_offdiag_constant(w, w, params, basis)


def ap1p2_constant(w, p1: float, p2: float, basis: Basis) -> float:
    """``[w]_{p1,p2} = sup_E <w^{-1}>_{p1',E} <w>_{p2,E}``."""
    w = _check_weight(w)
    a = _avg_recip(basis, 1.0 / w, 1.0 - recip(p1))
    b = _avg_recip(basis, w, recip(p2))
    return float(np.max(a * b))


# ---------------------------------------------------------------------------
# interpolation


@dataclass
class InterpolatedWeight:
    weight: np.ndarray
    constant: float
    bound: float
    theta: tuple

    @property
    def holds(self) -> bool:
        return self.constant <= self.bound * (1 + 1e-12)


def interpolate_weights(w, v, p: float, r: float, s: float, basis: Basis) -> InterpolatedWeight:
    """Combine ``w`` in ``A_{r,(r,s)}`` and ``v`` in ``A_{s,(r,s)}`` into ``A_{p,(r,s)}``.

    The result is ``w^{t1} v^{t2}`` with ``t1 = (1/p-1/s)/(1/r-1/s)`` and
    ``t2 = (1/r-1/p)/(1/r-1/s)``, bounded by ``[w]^{t1} [v]^{t2}``.
    """
    w = _check_weight(w)
    v = _check_weight(v)
    ip, ir, is_ = _check_exponents(p, r, s)
    gap = ir - is_
    t1 = (ip - is_) / gap
    t2 = (ir - ip) / gap
    u = w**t1 * v**t2
    c = aprs_constant(u, p, r, s, basis)
    cw = aprs_constant(w, r, r, s, basis)
    cv = aprs_constant(v, s, r, s, basis)
    bound = (cw**t1 if t1 else 1.0) * (cv**t2 if t2 else 1.0)
    return InterpolatedWeight(u, c, bound, (t1, t2))


# ---------------------------------------------------------------------------
# power weights


def origin_cell_average(beta: float, d: int, h: float) -> float:
    """Mean of ``|x|^{beta d}`` over the cube ``[0, h)^d``."""
    e = beta * d
    if e <= -d:
        raise ValueError("|x|^{beta d} is not locally integrable")
    if d == 1:
        return h**e / (e + 1.0)
    val, _ = integrate.nquad(lambda *x: np.sqrt(np.sum(np.square(x))) ** e,
                             [[0.0, 1.0]] * d, opts={"epsabs": 1e-12, "epsrel": 1e-10})
    return h**e * val


def power_weight(grid: Grid, beta: float) -> np.ndarray:
    """``|x|^{beta d}`` at cell centres; cells touching the origin get their exact mean.

    On an origin-centred grid the origin is a vertex shared by ``2^d`` cells,
    all congruent to ``[0, h)^d`` by reflection.
    """
    d = grid.d
    c = grid.centers
    w = np.linalg.norm(c, axis=1) ** (beta * d)
    lo = grid.origin + grid.multi_index * grid.h
    touching = np.all(np.isclose(lo, 0.0) | np.isclose(lo + grid.h, 0.0), axis=1)
    if np.any(touching):
        w[touching] = origin_cell_average(beta, d, grid.h)
    return w


@dataclass
class MembershipVerdict:
    verdict: str
    resolutions: list
    constants: list
    ratios: list
    slope: float

    def describe(self) -> dict:
        return {"verdict": self.verdict, "n": self.resolutions, "constants": self.constants,
                "ratios": self.ratios, "slope": self.slope}


# verdict thresholds, chosen from pilot sweeps over n = 16..512 in d = 1
STABLE_RATIO = 1.005
SHRINK_RATIO = 0.9


def growth_verdict(constants, stable_ratio: float = STABLE_RATIO,
                   shrink_ratio: float = SHRINK_RATIO) -> tuple[str, list]:
    """Classify a sequence of constants indexed by successive grid doublings.

    Outside the admissible range the constants grow like a (possibly tiny)
    power of ``n``, so their increments eventually stop shrinking; inside
    they converge and the increments decay geometrically. The verdict looks
    at the ratios of successive increments over the last three doublings:
    ``outside`` when none of them is below one, ``inside`` when all of them
    are at most ``shrink_ratio`` or the last doubling changed the constant by
    at most ``stable_ratio``; anything else is ``inconclusive``.
    """
    c = np.asarray(constants, dtype=float)
    inc = np.diff(c)
    rho = [inc[i + 1] / inc[i] if inc[i] > 0 else (0.0 if inc[i + 1] <= 0 else np.inf)
           for i in range(inc.size - 1)]
    tail = rho[-3:]
    if c[-1] / c[-2] <= stable_ratio:
        return "inside", rho
    if inc[-1] > 0 and all(t >= 1 for t in tail):
        return "outside", rho
    if all(t <= shrink_ratio for t in tail):
        return "inside", rho
    return "inconclusive", rho


def power_weight_in_aprs(beta: float, p: float, r: float, s: float, d: int = 1,
                         resolutions=None, flavor: str = "dyadic",
                         constant=None) -> MembershipVerdict:
    """Decide membership of ``|x|^{beta d}`` in ``A_{p,(r,s)}`` from a resolution sweep.

    Constants are computed on origin-centred grids of increasing resolution
    and classified by :func:`growth_verdict`. ``constant`` may replace the
    default ``aprs_constant`` (e.g. by an off-diagonal constant); it is called
    as ``constant(weight, basis)``.
    """
    from .lattice import make_basis

    if resolutions is None:
        resolutions = (16, 32, 64, 128, 256, 512) if d == 1 else (4, 8, 16, 32)
    if constant is None:
        def constant(w, b):
            return aprs_constant(w, p, r, s, b)
    consts = []
    for n in resolutions:
        g = Grid.centered(d, n)
        consts.append(constant(power_weight(g, beta), make_basis(g, flavor)))
    ratios = [consts[i + 1] / consts[i] for i in range(len(consts) - 1)]
    x = np.log(np.asarray(resolutions[-3:], dtype=float))
    slope = float(np.polyfit(x, np.log(np.asarray(consts[-3:])), 1)[0])
    verdict, _ = growth_verdict(consts)
    return MembershipVerdict(verdict, list(resolutions), consts, ratios, slope)


def membership_interval(p: float, r: float, s: float) -> tuple[float, float]:
    """Open interval of ``beta`` with ``|x|^{beta d}`` in ``A_{p,(r,s)}``."""
    return (-(recip(p) - recip(s)), recip(r) - recip(p))


# ---------------------------------------------------------------------------
# exact rational tier


def aprs_constant_exact(w, p, r, s, basis: Basis):
    """Exact ``[w]_{p,(r,s)}`` for rational weights when both averaging exponents are 1 or inf.

    Returns a :class:`fractions.Fraction`. Other exponents raise ``ValueError``.
    """
    wq = [Fraction(x) for x in w]
    ip, ir, is_ = (Fraction(recip(p)).limit_denominator(10**6),
                   Fraction(recip(r)).limit_denominator(10**6),
                   Fraction(recip(s)).limit_denominator(10**6))
    t1, t2 = ir - ip, ip - is_
    if t1 not in (0, 1) or t2 not in (0, 1):
        raise ValueError("exact mode needs averaging exponents in {1, inf}")
    best = Fraction(0)
    for cells in basis._member_lists:
        inv = [1 / wq[i] for i in cells]
        vals = [wq[i] for i in cells]
        a = max(inv) if t1 == 0 else sum(inv) / len(inv)
        b = max(vals) if t2 == 0 else sum(vals) / len(vals)
        best = max(best, a * b)
    return best
