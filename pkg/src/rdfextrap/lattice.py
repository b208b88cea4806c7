"""Finite uniform grids and the bases of sets used by maximal operators.

A grid function is a flat float array with one entry per cell (C order over
the multi-index). Every basis is stored as a dense boolean incidence matrix
so that averages over all sets reduce to a single matrix product.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

FLAVORS = ("dyadic", "shifted-dyadic", "shifted-dyadic-union", "cubes")


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n**d`` cells on the cube ``origin + [0, side)^d``.

    Parameters
    ----------
    d : int
        Dimension, 1 to 3.
    n : int
        Cells per side, a power of two with ``n >= 2``.
    origin : float
        Lower corner coordinate (same on every axis).
    side : float
        Side length of the base cube.
    """

    d: int
    n: int
    origin: float = 0.0
    side: float = 1.0

    def __post_init__(self):
        if not (1 <= self.d <= 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        m = int(round(np.log2(self.n))) if self.n > 0 else -1
        if self.n < 2 or 2**m != self.n:
            raise ValueError(f"cells per side must be a power of two >= 2, got {self.n}")
        if not self.side > 0:
            raise ValueError("side must be positive")

    @classmethod
    def unit(cls, d: int, n: int) -> Grid:
        return cls(d, n, 0.0, 1.0)

    @classmethod
    def centered(cls, d: int, n: int) -> Grid:
        """Grid on ``[-1, 1)^d``; the origin is a vertex shared by ``2**d`` cells."""
        return cls(d, n, -1.0, 2.0)

    @property
    def levels(self) -> int:
        return int(round(np.log2(self.n)))

    @property
    def ncells(self) -> int:
        return self.n**self.d

    @property
    def h(self) -> float:
        return self.side / self.n

    @property
    def cell_measure(self) -> float:
        return self.h**self.d

    @property
    def total_measure(self) -> float:
        return self.side**self.d

    @cached_property
    def multi_index(self) -> np.ndarray:
        """Integer array of shape (ncells, d) with each cell's multi-index."""
        idx = np.indices((self.n,) * self.d).reshape(self.d, -1).T
        return np.ascontiguousarray(idx)

    @cached_property
    def centers(self) -> np.ndarray:
        return self.origin + (self.multi_index + 0.5) * self.h

    def flat(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(multi), (self.n,) * self.d))

    def ones(self) -> np.ndarray:
        return np.ones(self.ncells)

    def indicator(self, cells) -> np.ndarray:
        out = np.zeros(self.ncells)
        out[np.asarray(cells, dtype=int)] = 1.0
        return out

    def describe(self) -> dict:
        return {"d": self.d, "n": self.n, "origin": self.origin, "side": self.side}


@dataclass(frozen=True, eq=False)
class BasisSet:
    """One set of a basis: its cells, measure and (when cubical) geometry."""

    cells: np.ndarray
    measure: float
    corner: tuple | None = None
    side_cells: int | None = None

    def describe(self) -> dict:
        return {"corner": list(self.corner) if self.corner is not None else None,
                "side_cells": self.side_cells, "cells": self.cells.tolist()}


@dataclass(eq=False)
class Basis:
    """Finite family of cell sets over a grid.

    Attributes
    ----------
    grid : Grid
    flavor : str
    incidence : ndarray of bool, shape (nsets, ncells)
    corners, sides : per-set cube geometry (side in cells); ``None`` rows for
        non-cubical sets.
    """

    grid: Grid
    flavor: str
    incidence: np.ndarray
    corners: np.ndarray | None = None
    sides: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        inc = np.asarray(self.incidence, dtype=bool)
        if inc.ndim != 2 or inc.shape[1] != self.grid.ncells:
            raise ValueError("incidence must have shape (nsets, ncells)")
        if not inc.any(axis=1).all():
            raise ValueError("every basis set must be nonempty")
        self.incidence = inc

    def __len__(self) -> int:
        return self.incidence.shape[0]

    @cached_property
    def counts(self) -> np.ndarray:
        return self.incidence.sum(axis=1).astype(float)

    @cached_property
    def measures(self) -> np.ndarray:
        return self.counts * self.grid.cell_measure

    @cached_property
    def _inc_float(self) -> np.ndarray:
        return self.incidence.astype(float)

    @cached_property
    def _member_lists(self) -> list:
        return [np.flatnonzero(row) for row in self.incidence]

    def sets(self) -> list[BasisSet]:
        out = []
        for i, cells in enumerate(self._member_lists):
            corner = tuple(int(c) for c in self.corners[i]) if self.corners is not None else None
            side = int(self.sides[i]) if self.sides is not None else None
            out.append(BasisSet(cells, float(self.measures[i]), corner, side))
        return out

    def averages(self, f, p: float = 1.0) -> np.ndarray:
        """Return ``<f>_{p,E}`` for every set E of the basis.

        ``p = inf`` gives the maximum of ``|f|`` over each set.
        """
        a = np.abs(np.asarray(f, dtype=float))
        if np.isinf(p):
            return np.where(self.incidence, a[None, :], 0.0).max(axis=1)
        if p == 1:
            return self._inc_float @ a / self.counts
        return (self._inc_float @ a**p / self.counts) ** (1.0 / p)

    def spread_max(self, set_values) -> np.ndarray:
        """Pointwise ``max_{E ∋ x} set_values[E]`` (the generic maximal envelope)."""
        v = np.asarray(set_values, dtype=float)
        return np.where(self.incidence, v[:, None], -np.inf).max(axis=0)

    @cached_property
    def containment(self) -> np.ndarray:
        """``C[i, j]`` is True when set j is contained in set i."""
        inter = self._inc_float @ self._inc_float.T
        return np.isclose(inter, self.counts[None, :])

    def restrict_cells(self, keep) -> Basis:
        """Sub-basis of the sets whose index is in ``keep`` (mask or indices)."""
        keep = np.asarray(keep)
        corners = self.corners[keep] if self.corners is not None else None
        sides = self.sides[keep] if self.sides is not None else None
        return Basis(self.grid, self.flavor, self.incidence[keep], corners, sides)

    def describe(self) -> dict:
        return {"flavor": self.flavor, "nsets": len(self), "grid": self.grid.describe()}


def _cube_mask(grid: Grid, corner, side: int, wrap: bool) -> np.ndarray:
    mi = grid.multi_index
    rel = mi - np.asarray(corner)[None, :]
    if wrap:
        rel = np.mod(rel, grid.n)
    return np.all((rel >= 0) & (rel < side), axis=1)


def dyadic_basis(grid: Grid) -> Basis:
    """All dyadic subcubes of the base cube, root included.

    Examples
    --------
    >>> len(dyadic_basis(Grid.unit(1, 4)))
    7
    """
    return _dyadic_translate(grid, (0,) * grid.d, flavor="dyadic")


def _dyadic_translate(grid: Grid, shift, flavor: str) -> Basis:
    rows, corners, sides = [], [], []
    mi = grid.multi_index
    rel = np.mod(mi - np.asarray(shift)[None, :], grid.n)
    for level in range(grid.levels + 1):
        side = grid.n >> level
        label = rel // side
        nper = grid.n // side
        key = np.ravel_multi_index(tuple(label.T), (nper,) * grid.d)
        for k in range(nper**grid.d):
            mask = key == k
            rows.append(mask)
            lab = np.array(np.unravel_index(k, (nper,) * grid.d))
            corners.append(np.mod(lab * side + np.asarray(shift), grid.n))
            sides.append(side)
    return Basis(grid, flavor, np.array(rows), np.array(corners), np.array(sides))


def shift_offsets(grid: Grid) -> list[tuple]:
    """Cell offsets ``round(t n / 3)`` for ``t in {0,1,2}^d``."""
    base = [int(round(t * grid.n / 3.0)) % grid.n for t in range(3)]
    return list(itertools.product(base, repeat=grid.d))


def shifted_dyadic_bases(grid: Grid) -> tuple[list[Basis], Basis]:
    """The ``3**d`` periodically translated dyadic systems and their union.

    Translates wrap around the base cube. Duplicate sets are removed from the
    merged basis.
    """
    translates = [_dyadic_translate(grid, s, flavor="shifted-dyadic") for s in shift_offsets(grid)]
    inc = np.vstack([b.incidence for b in translates])
    corners = np.vstack([b.corners for b in translates])
    sides = np.concatenate([b.sides for b in translates])
    _, first = np.unique(np.packbits(inc, axis=1), axis=0, return_index=True)
    first = np.sort(first)
    merged = Basis(grid, "shifted-dyadic-union", inc[first], corners[first], sides[first])
    return translates, merged


def cube_basis(grid: Grid, max_side: int | None = None, require_connected: bool = True) -> Basis:
    """All axis-parallel non-wrapping cubes with sides ``1..max_side`` cells.

    Raises
    ------
    ValueError
        If ``max_side < n`` while ``require_connected`` is set, since two
        far-apart cells would then share no common set.
    """
    n = grid.n
    max_side = n if max_side is None else int(max_side)
    if not 1 <= max_side <= n:
        raise ValueError(f"max_side must lie in [1, {n}]")
    if require_connected and max_side < n:
        raise ValueError("max_side < n leaves pairs of cells without a common set")
    rows, corners, sides = [], [], []
    for side in range(1, max_side + 1):
        for corner in itertools.product(range(n - side + 1), repeat=grid.d):
            rows.append(_cube_mask(grid, corner, side, wrap=False))
            corners.append(corner)
            sides.append(side)
    return Basis(grid, "cubes", np.array(rows), np.array(corners), np.array(sides))


def make_basis(grid: Grid, flavor: str) -> Basis:
    if flavor == "dyadic":
        return dyadic_basis(grid)
    if flavor in ("shifted-dyadic", "shifted-dyadic-union"):
        return shifted_dyadic_bases(grid)[1]
    if flavor == "cubes":
        return cube_basis(grid)
    raise ValueError(f"unknown basis flavor {flavor!r}")


def check_basis_properties(basis: Basis) -> tuple[bool, bool]:
    """Exhaustively check covering and the common-set property for cell pairs."""
    inc = basis._inc_float
    covers = bool(basis.incidence.any(axis=0).all())
    pairs = bool(((inc.T @ inc) > 0).all())
    return covers, pairs


def basis_dominated(e_basis: Basis, f_basis: Basis, max_side: int | None = None) -> float | None:
    """Smallest C with: every E has some F ⊇ E with ``|F| <= C |E|``.

    Parameters
    ----------
    max_side : int, optional
        Only sets of ``e_basis`` with side at most this many cells are
        considered (requires cubical geometry).

    Returns
    -------
    float or None
        ``None`` when some E has no containing F.
    """
    if e_basis.grid != f_basis.grid:
        raise ValueError("bases live on different grids")
    e_inc = e_basis._inc_float
    if max_side is not None:
        if e_basis.sides is None:
            raise ValueError("max_side filter needs cubical sets")
        e_inc = e_inc[e_basis.sides <= max_side]
    e_counts = e_inc.sum(axis=1)
    contains = np.isclose(f_basis._inc_float @ e_inc.T, e_counts[None, :])
    ratio = np.where(contains, f_basis.counts[:, None] / e_counts[None, :], np.inf)
    best = ratio.min(axis=0)
    if not np.all(np.isfinite(best)):
        return None
    return float(best.max())
