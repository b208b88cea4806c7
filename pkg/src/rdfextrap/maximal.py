"""Maximal operators over a finite basis and operator-norm estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Basis


def maximal(f, basis: Basis, p: float = 1.0) -> np.ndarray:
    """``M_p f(x) = max_{E ∋ x} <f>_{p,E}``; ``p = inf`` uses the max over E."""
    if not (p > 0):
        raise ValueError("p must be positive")
    return basis.spread_max(basis.averages(f, p))


def fractional_maximal(f, basis: Basis, lam: float) -> np.ndarray:
    """``M_λ f(x) = max_{E ∋ x} |E|^{λ/d} <f>_{1,E}`` for ``0 < λ < d``."""
    d = basis.grid.d
    if not 0 < lam < d:
        raise ValueError(f"lambda must lie in (0, {d})")
    return basis.spread_max(basis.measures ** (lam / d) * basis.averages(f, 1.0))


def sharp_maximal(f, basis: Basis) -> np.ndarray:
    """``M^# f(x) = max_{E ∋ x} min_c <|f - c|>_{1,E}``.

    Cells of one grid share a common measure, so the optimal constant is a
    plain median of the cell values of E.
    """
    f = np.asarray(f, dtype=float)
    osc = np.empty(len(basis))
    for i, cells in enumerate(basis._member_lists):
        vals = f[cells]
        osc[i] = np.mean(np.abs(vals - np.median(vals)))
    return basis.spread_max(osc)


def iterate_maximal(f, basis: Basis, k: int) -> np.ndarray:
    out = np.abs(np.asarray(f, dtype=float))
    for _ in range(k):
        out = maximal(out, basis)
    return out


# ---------------------------------------------------------------------------
# operator norms


@dataclass
class OpNormEstimate:
    """Lower-bound estimate of ``||M_p||_{X -> X}`` with the best witness.

    ``K`` is the value handed to downstream constructions
    (``value * safety``).
    """

    value: float
    witness: np.ndarray
    source: str
    K: float
    evaluations: int


def _space_norm(space):
    if callable(space) and not hasattr(space, "norm"):
        return space
    return space.norm


def op_norm_estimate(space, basis: Basis, p: float = 1.0, *, starts: int = 50,
                     iters: int = 500, seed: int = 0, safety: float = 1.0,
                     operator=None) -> OpNormEstimate:
    """Estimate ``sup ||M_p f||_X / ||f||_X`` from below.

    The test family is: the constant function, indicators of every basis set,
    point masses, and ``starts`` multiplicative random-search ascents of
    ``iters`` steps each (a proposal ``f * exp(step * xi)`` is accepted when
    the ratio increases, otherwise the step is halved).

    Parameters
    ----------
    space : object with ``norm(f)`` or a callable norm
    operator : callable, optional
        Replaces ``M_p`` (e.g. a shifted or weighted maximal operator).
    """
    norm = _space_norm(space)
    grid = basis.grid
    op = operator if operator is not None else (lambda f: maximal(f, basis, p))
    count = 0

    def ratio(f):
        nonlocal count
        count += 1
        den = norm(f)
        if not np.isfinite(den) or den <= 0:
            return 0.0
        return float(norm(op(f)) / den)

    best, witness, source = ratio(grid.ones()), grid.ones(), "constant"
    for row in basis.incidence:
        f = row.astype(float)
        r = ratio(f)
        if r > best:
            best, witness, source = r, f, "indicator"
    for i in range(grid.ncells):
        f = np.zeros(grid.ncells)
        f[i] = 1.0
        r = ratio(f)
        if r > best:
            best, witness, source = r, f, "point-mass"

    rng = np.random.default_rng(seed)
    for _ in range(starts):
        u = rng.normal(size=grid.ncells)
        cur = ratio(np.exp(u))
        step = 1.0
        for _ in range(iters):
            trial = u + step * rng.normal(size=grid.ncells)
            r = ratio(np.exp(trial))
            if r > cur:
                u, cur = trial, r
            else:
                step *= 0.5
                if step < 1e-6:
                    break
        if cur > best:
            best, witness, source = cur, np.exp(u), "ascent"
    best = max(best, 1.0)
    return OpNormEstimate(best, witness, source, best * safety, count)


# ---------------------------------------------------------------------------
# self-improvement


@dataclass
class SelfImproveResult:
    series: np.ndarray
    mq: np.ndarray
    c2: float
    lower: float
    terms: int


def self_improve_series(f, basis: Basis, q: float, C1: float, *, tol: float = 1e-12,
                        max_terms: int = 10_000) -> SelfImproveResult:
    """Evaluate ``S = sum_k M^{k+1} f / (C1 q')^k`` and compare with ``M_q f``.

    Returns the smallest ``C2`` with ``M_q f <= C2 S`` pointwise and the
    smallest ``c`` with ``S <= c M_q f`` (the reverse side of the sandwich).
    """
    if not q > 1:
        raise ValueError("q must exceed 1")
    qp = 1.0 if np.isinf(q) else q / (q - 1.0)
    ratio_c = C1 * qp
    if not ratio_c > 1:
        raise ValueError("the series diverges unless C1 q' > 1")
    term = maximal(f, basis)
    total = term.copy()
    sup_f = float(np.max(np.abs(f)))
    k = 0
    while True:
        k += 1
        scale = ratio_c ** (-k)
        # every later term is bounded by sup|f| * scale (M contracts sup norm)
        if sup_f * scale / (1 - 1 / ratio_c) <= tol * max(float(total.max()), 1e-300) or k >= max_terms:
            break
        term = maximal(term, basis)
        total = total + term * scale
    mq = maximal(f, basis, q)
    pos = total > 0
    c2 = float(np.max(mq[pos] / total[pos])) if pos.any() else 0.0
    posq = mq > 0
    lower = float(np.max(total[posq] / mq[posq])) if posq.any() else 0.0
    return SelfImproveResult(total, mq, c2, lower, k)


@dataclass
class RescalingRecord:
    lhs: float
    rhs: float
    rel_err: float


def rescaling_check(space, basis: Basis, q: float, f_family) -> list[RescalingRecord]:
    """Compare ``||M_q f||_X^q / ||f||_X^q`` with the ratio for ``M`` on ``X^q``.

    ``space`` must offer ``norm``; the concavified space is built with
    :class:`rdfextrap.spaces.Concavified`.
    """
    from .spaces import Concavified

    cx = Concavified(space, q)
    out = []
    for f in f_family:
        a = np.abs(np.asarray(f, dtype=float))
        lhs = (space.norm(maximal(a, basis, q)) / space.norm(a)) ** q
        fq = a**q
        rhs = cx.norm(maximal(fq, basis)) / cx.norm(fq)
        out.append(RescalingRecord(lhs, rhs, abs(lhs - rhs) / max(abs(rhs), 1e-300)))
    return out
