"""Sparse families, sparse operators, the discrete Riesz potential and maximal forms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .lattice import Basis, Grid
from .maximal import maximal


@dataclass
class SparseFamily:
    """Members of a basis together with disjoint subsets ``E_Q`` of each member.

    Attributes
    ----------
    basis : Basis
    members : ndarray of int
        Indices into ``basis``.
    majorants : list of ndarray
        Cell lists ``E_Q``, one per member.
    """

    basis: Basis
    members: np.ndarray
    majorants: list

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=int)
        if len(self.majorants) != self.members.size:
            raise ValueError("one majorising subset per member is required")

    def __len__(self) -> int:
        return int(self.members.size)

    @property
    def eta(self) -> float:
        """Exact ``min_Q |E_Q| / |Q|``."""
        if len(self) == 0:
            return 1.0
        counts = self.basis.counts[self.members]
        return float(min(len(e) / c for e, c in zip(self.majorants, counts)))

    def check(self) -> tuple[bool, bool]:
        """(pairwise disjoint, each E_Q inside its Q)."""
        seen = np.zeros(self.basis.grid.ncells, dtype=int)
        inside = True
        for q, e in zip(self.members, self.majorants):
            seen[e] += 1
            inside &= bool(self.basis.incidence[q, e].all())
        return bool(np.all(seen <= 1)), inside

    @property
    def incidence(self) -> np.ndarray:
        return self.basis._inc_float[self.members]

    @property
    def measures(self) -> np.ndarray:
        return self.basis.measures[self.members]

    def describe(self) -> dict:
        sets = self.basis.sets()
        return {"eta": self.eta,
                "members": [dict(sets[q].describe(), E=e.tolist())
                            for q, e in zip(self.members, self.majorants)]}


def _dyadic_children(basis: Basis) -> list:
    """Children of each set in a dyadic basis (maximal proper subsets)."""
    cont = basis.containment.copy()
    np.fill_diagonal(cont, False)
    counts = basis.counts
    kids = []
    for i in range(len(basis)):
        sub = np.flatnonzero(cont[i])
        if sub.size == 0:
            kids.append(sub)
            continue
        top = counts[sub].max()
        kids.append(sub[counts[sub] == top])
    return kids


def sparse_select(f, basis: Basis, a: float | None = None) -> SparseFamily:
    """Calderón-Zygmund stopping family of ``f >= 0`` in a dyadic basis.

    Starting from the root, the stopping children of a stopping set Q are the
    maximal dyadic Q' inside Q with ``<f>_{Q'} >= a <f>_Q`` (and positive
    average). ``E_Q`` is Q minus its stopping children. Every stopping child
    of Q has ``|Q'| < |Q| / a`` summed, so ``|E_Q| >= (1 - 1/a)|Q|``.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("sparse_select needs f >= 0")
    grid = basis.grid
    if a is None:
        a = 2.0 ** (grid.d + 1)
    if not a > 1:
        raise ValueError("threshold ratio must exceed 1")
    avgs = basis.averages(f, 1.0)
    kids = _dyadic_children(basis)
    root = int(np.argmax(basis.counts))
    if basis.counts[root] != grid.ncells:
        raise ValueError("basis has no root set")
    members, majorants = [], []
    queue = [root]
    while queue:
        q = queue.pop(0)
        level = avgs[q]
        stops = []
        frontier = list(kids[q])
        while frontier:
            c = frontier.pop(0)
            if avgs[c] > 0 and avgs[c] >= a * level:
                stops.append(c)
            else:
                frontier.extend(kids[c])
        covered = np.zeros(grid.ncells, dtype=bool)
        for c in stops:
            covered |= basis.incidence[c]
        e = np.flatnonzero(basis.incidence[q] & ~covered)
        members.append(q)
        majorants.append(e)
        queue.extend(stops)
    return SparseFamily(basis, np.array(members), majorants)


def sparse_operator(family: SparseFamily, f, lam: float = 0.0, r: float = 1.0) -> np.ndarray:
    """``sum_Q |Q|^{lam/d} <f>_{r,Q} 1_Q``."""
    d = family.basis.grid.d
    if not 0 <= lam < d:
        raise ValueError(f"lambda must lie in [0, {d})")
    if not r > 0:
        raise ValueError("r must be positive")
    avg = family.basis.averages(f, r)[family.members]
    coef = family.measures ** (lam / d) * avg
    return coef @ family.incidence


def sparse_matrix(family: SparseFamily, lam: float = 0.0) -> np.ndarray:
    """Matrix of the linear operator ``f -> sum_Q |Q|^{lam/d} <f>_Q 1_Q``."""
    d = family.basis.grid.d
    inc = family.incidence
    counts = inc.sum(axis=1)
    coef = family.measures ** (lam / d) / counts
    return (inc * coef[:, None]).T @ inc


def dominated_by_sparse(f, family: SparseFamily, a: float) -> float:
    """Smallest C with ``M f <= C A_S f`` pointwise (``inf`` if impossible)."""
    mf = maximal(f, family.basis)
    af = sparse_operator(family, f)
    pos = mf > 0
    if np.any(af[pos] <= 0):
        return np.inf
    return float(np.max(mf[pos] / af[pos])) if pos.any() else 0.0


# ---------------------------------------------------------------------------
# Riesz potential


def _diag_average(lam: float, d: int, h: float) -> float:
    """Mean of ``|z|^{lam-d}`` over the centred cube ``[-h/2, h/2]^d``."""
    e = lam - d
    if d == 1:
        return (2.0 / h) * (h / 2.0) ** lam / lam
    # by symmetry average over [0, 1/2]^d, then scale
    val, _ = integrate.nquad(lambda *x: np.sqrt(np.sum(np.square(x))) ** e,
                             [[0.0, 0.5]] * d, opts={"epsabs": 1e-12, "epsrel": 1e-10})
    return (2.0**d) * val * h**e


def riesz_kernel(grid: Grid, lam: float) -> np.ndarray:
    """Symmetric matrix ``K`` with ``I_lam f = K f``."""
    d = grid.d
    if not 0 < lam < d:
        raise ValueError(f"lambda must lie in (0, {d})")
    c = grid.centers
    dist = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1)
    with np.errstate(divide="ignore"):
        k = np.where(dist > 0, dist ** (lam - d), 0.0)
    np.fill_diagonal(k, _diag_average(lam, d, grid.h))
    return k * grid.cell_measure


def riesz_potential(f, grid: Grid, lam: float, kernel: np.ndarray | None = None) -> np.ndarray:
    """``I_lam f(x) = int f(y) |x-y|^{lam-d} dy`` discretised at cell centres.

    The diagonal uses the exact mean of the kernel over a cell.
    """
    k = riesz_kernel(grid, lam) if kernel is None else kernel
    return k @ np.asarray(f, dtype=float)


# ---------------------------------------------------------------------------
# maximal forms


def bisublinear_maximal(f, g, r: float, s_dual: float, basis: Basis) -> np.ndarray:
    """``M_{r,s'}(f,g) = sup_Q <f>_{r,Q} <g>_{s',Q} 1_Q``."""
    return basis.spread_max(basis.averages(f, r) * basis.averages(g, s_dual))


def multisublinear_maximal(fs, g, rs, s_dual: float, basis: Basis) -> np.ndarray:
    """``sup_Q prod_j <f_j>_{r_j,Q} <g>_{s',Q} 1_Q``."""
    prod = basis.averages(g, s_dual)
    for f, r in zip(fs, rs):
        prod = prod * basis.averages(f, r)
    return basis.spread_max(prod)


def sparse_form(family: SparseFamily, f, g, r: float = 1.0, s_dual: float = 1.0,
                lam: float = 0.0) -> float:
    """``sum_Q |Q|^{lam/d} <f>_{r,Q} <g>_{s',Q} |Q|``."""
    b = family.basis
    d = b.grid.d
    m = family.members
    q = b.measures[m]
    return float(np.sum(q ** (lam / d) * b.averages(f, r)[m] * b.averages(g, s_dual)[m] * q))


def sparse_form_bound(family: SparseFamily, f, g, r: float = 1.0, s_dual: float = 1.0) -> float:
    """``eta^{-1} ||M_{r,s'}(f,g)||_{L^1}``, which dominates the sparse form at ``lam = 0``."""
    b = family.basis
    mm = bisublinear_maximal(f, g, r, s_dual, b)
    return float(b.grid.cell_measure * mm.sum() / family.eta)


def bilinear_sparse(family: SparseFamily, f1, f2, r1: float = 1.0, r2: float = 1.0) -> np.ndarray:
    """Bilinear sparse model ``sum_Q <f1>_{r1,Q} <f2>_{r2,Q} 1_Q``."""
    b = family.basis
    m = family.members
    coef = b.averages(f1, r1)[m] * b.averages(f2, r2)[m]
    return coef @ family.incidence


def riesz_form_constant(grid: Grid, lam: float, pairs: int = 20, seed=0) -> float:
    """Measured constant in ``||(I_lam f) g||_{L^{r2}} <= C ||M_{1,s1'}(f,g)||_{L^1}``.

    Uses ``1/r2 = 1 - lam/d`` and ``1/s1 = lam/d`` on the all-cubes basis of a
    one-dimensional grid; ``f`` and ``g`` range over seeded Gaussian bumps.
    Returns the largest ratio seen.
    """
    from .lattice import cube_basis

    if grid.d != 1:
        raise ValueError("riesz_form_constant samples bumps in d = 1")
    basis = cube_basis(grid)
    kr = riesz_kernel(grid, lam)
    e = 1.0 - lam / grid.d
    s1d = 1.0 / e
    x = grid.centers[:, 0]
    mid = grid.origin + grid.total_measure / 2
    half = grid.total_measure / 2
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(pairs):
        c1, c2 = mid + half * rng.uniform(-0.8, 0.8, size=2)
        s1, s2 = half * rng.uniform(0.05, 0.5, size=2)
        f = np.exp(-(((x - c1) / s1) ** 2))
        g = np.exp(-(((x - c2) / s2) ** 2))
        lhs = (grid.cell_measure * np.sum(np.abs(kr @ f * g) ** (1.0 / e))) ** e
        rhs = grid.cell_measure * bisublinear_maximal(f, g, 1.0, s1d, basis).sum()
        best = max(best, lhs / rhs)
    return float(best)
