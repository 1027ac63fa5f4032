"""Core data model for dyadic regression arrays.

A dyadic dataset is a rectangular grid of cells (i, j) holding an outcome,
one or more treatment values, and optional covariates.  Estimation works on
the stacked representation: cells are laid out row-major, so cell (i, j) in
1-based grid coordinates occupies stacked row (i - 1) * n_cols + j.  All
in-memory arrays are 0-based; the 1-based convention appears only at the
boundaries (file formats and :func:`row_index`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateInputError, DimensionError, MissingDataError


def row_index(i: int, j: int, n_cols: int) -> int:
    """Stacked row of cell (i, j), all 1-based.

    This is the boundary convention used in files and printed reports:
    ``row_index(1, 1, n) == 1`` and ``row_index(i, j, n) == (i - 1) * n + j``.
    """
    if not (1 <= j <= n_cols) or i < 1:
        raise DimensionError(f"cell ({i}, {j}) outside a grid with {n_cols} columns")
    return (i - 1) * n_cols + j


def stacked_position(i: int, j: int, n_cols: int) -> int:
    """0-based stacked row of 0-based cell (i, j); storage-side counterpart."""
    return i * n_cols + j


@dataclass(frozen=True)
class DyadArray:
    """Grid-shaped dyadic data.

    Parameters
    ----------
    y : ndarray, shape (n_rows, n_cols)
        Outcome per cell.
    d : ndarray, shape (n_rows, n_cols, d_dim)
        Treatment values per cell.
    x : ndarray, shape (n_rows, n_cols, p)
        Covariates per cell; p may be 0.
    observed : ndarray of bool, shape (n_rows, n_cols)
        Observation indicator; defaults to all observed.
    """

    y: np.ndarray
    d: np.ndarray
    x: np.ndarray
    observed: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 2:
            raise DimensionError(f"y must be 2-D, got shape {np.shape(self.y)}")
        d = np.asarray(self.d, dtype=float)
        if d.ndim == 2:
            d = d[:, :, None]
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 2:
            x = x[:, :, None]
        if d.shape[:2] != y.shape or x.shape[:2] != y.shape:
            raise DimensionError(
                f"grid shapes disagree: y {y.shape}, d {d.shape[:2]}, x {x.shape[:2]}"
            )
        observed = self.observed
        if observed is None:
            observed = np.ones(y.shape, dtype=bool)
        else:
            observed = np.asarray(observed).astype(bool)
            if observed.shape != y.shape:
                raise DimensionError(
                    f"observed shape {observed.shape} does not match grid {y.shape}"
                )
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "observed", observed)

    @property
    def n_rows(self) -> int:
        return self.y.shape[0]

    @property
    def n_cols(self) -> int:
        return self.y.shape[1]

    @property
    def d_dim(self) -> int:
        return self.d.shape[2]

    @property
    def p(self) -> int:
        return self.x.shape[2]

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    def is_complete(self) -> bool:
        return bool(self.observed.all())


def stack(array: DyadArray, which: str = "outcome") -> np.ndarray:
    """Stack one field of a fully observed array into row-major form.

    Parameters
    ----------
    array : DyadArray
        Must be fully observed; otherwise :class:`MissingDataError`.
    which : {"outcome", "treatment", "covariates"}

    Returns
    -------
    ndarray
        Shape (N,) for the outcome, (N, d_dim) or (N, p) otherwise, with
        N = n_rows * n_cols and cell (i, j) at position i * n_cols + j.
    """
    if not array.is_complete():
        n_miss = int((~array.observed).sum())
        raise MissingDataError(
            f"stack requires a fully observed array; {n_miss} cells missing"
        )
    n = array.n_cells
    if which == "outcome":
        return array.y.reshape(n).copy()
    if which == "treatment":
        return array.d.reshape(n, array.d_dim).copy()
    if which == "covariates":
        return array.x.reshape(n, array.p).copy()
    raise ValueError(f"unknown field {which!r}")


def unstack(values: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    """Inverse of :func:`stack`: reshape a stacked vector or matrix to the grid."""
    values = np.asarray(values)
    if values.shape[0] != n_rows * n_cols:
        raise DimensionError(
            f"stacked length {values.shape[0]} != {n_rows} * {n_cols}"
        )
    return values.reshape((n_rows, n_cols) + values.shape[1:]).copy()


@dataclass(frozen=True)
class StackedDesign:
    """Stacked regression pieces of a fully observed dyadic array."""

    y: np.ndarray
    d: np.ndarray
    x: np.ndarray
    n_rows: int
    n_cols: int

    @classmethod
    def from_array(cls, array: DyadArray) -> "StackedDesign":
        return cls(
            y=stack(array, "outcome"),
            d=stack(array, "treatment"),
            x=stack(array, "covariates"),
            n_rows=array.n_rows,
            n_cols=array.n_cols,
        )

    @property
    def n(self) -> int:
        return self.n_rows * self.n_cols


def _check_bijection(arr: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.intp)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D")
    n = arr.shape[0]
    seen = np.zeros(n, dtype=bool)
    if n and (arr.min() < 0 or arr.max() >= n):
        raise DimensionError(f"{name} maps outside its index set")
    seen[arr] = True
    if not seen.all():
        raise DimensionError(f"{name} is not a bijection")
    return arr


@dataclass(frozen=True)
class TwoWayPermutation:
    """A pair (pi, sigma) of bijections acting on rows and columns.

    Both are stored as 0-based index arrays: ``pi[i]`` is the image of row i.
    """

    pi: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pi", _check_bijection(self.pi, "pi"))
        object.__setattr__(self, "sigma", _check_bijection(self.sigma, "sigma"))

    @classmethod
    def identity(cls, n_rows: int, n_cols: int) -> "TwoWayPermutation":
        return cls(np.arange(n_rows), np.arange(n_cols))

    @property
    def n_rows(self) -> int:
        return self.pi.shape[0]

    @property
    def n_cols(self) -> int:
        return self.sigma.shape[0]

    def is_identity(self) -> bool:
        return bool(
            np.array_equal(self.pi, np.arange(self.n_rows))
            and np.array_equal(self.sigma, np.arange(self.n_cols))
        )

    def stacked(self) -> np.ndarray:
        """Row-level source map: stacked row of (i, j) reads from (pi(i), sigma(j))."""
        return (self.pi[:, None] * self.n_cols + self.sigma[None, :]).reshape(-1)

    def key(self) -> tuple:
        return (tuple(self.pi.tolist()), tuple(self.sigma.tolist()))


def compose(g: TwoWayPermutation, h: TwoWayPermutation) -> TwoWayPermutation:
    """Componentwise composition g after h: (g.pi o h.pi, g.sigma o h.sigma)."""
    if g.n_rows != h.n_rows or g.n_cols != h.n_cols:
        raise DimensionError(
            f"cannot compose permutations on ({g.n_rows}, {g.n_cols}) "
            f"and ({h.n_rows}, {h.n_cols})"
        )
    return TwoWayPermutation(g.pi[h.pi], g.sigma[h.sigma])


def apply_two_way(values: np.ndarray, perm: TwoWayPermutation) -> np.ndarray:
    """Apply a two-way permutation to a stacked vector or matrix.

    The output row for cell (i, j) holds the input row of cell
    (pi(i), sigma(j)); column structure is untouched.
    """
    values = np.asarray(values)
    n = perm.n_rows * perm.n_cols
    if values.shape[0] != n:
        raise DimensionError(
            f"stacked length {values.shape[0]} does not match "
            f"{perm.n_rows} x {perm.n_cols} grid"
        )
    return values[perm.stacked()]


@dataclass(frozen=True)
class PermutationFamily:
    """An indexed family of two-way permutations; member 0 is the identity."""

    members: tuple[TwoWayPermutation, ...]

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise DimensionError("a permutation family needs at least the identity")
        shapes = {(m.n_rows, m.n_cols) for m in members}
        if len(shapes) != 1:
            raise DimensionError("family members act on different grids")
        if not members[0].is_identity():
            raise DimensionError("family member 0 must be the identity")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, k: int) -> TwoWayPermutation:
        return self.members[k]

    @property
    def num_perms(self) -> int:
        """K, the number of non-identity members."""
        return len(self.members) - 1

    @property
    def n_rows(self) -> int:
        return self.members[0].n_rows

    @property
    def n_cols(self) -> int:
        return self.members[0].n_cols

    def stacked(self) -> np.ndarray:
        """All members as an (K+1, N) array of stacked source maps."""
        return np.stack([m.stacked() for m in self.members])


def effective_variance(values: np.ndarray, level: str, n: int) -> float:
    """Scale-adjusted variance diagnostic for comparing covariate designs.

    Dyad-level variation is scaled by n^2 and node-level variation by n, so
    designs with the same effective variance put comparable information into
    a grid of n^2 cells.  Uses the population (denominator-n) variance.

    Parameters
    ----------
    values : array_like
        Sampled values of the covariate at its own level.
    level : {"dyad", "node"}
    n : int
        Number of nodes per side of the grid.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        raise DegenerateInputError(
            f"effective variance needs at least two values, got {values.size}"
        )
    if n < 1:
        raise DimensionError(f"n must be positive, got {n}")
    var = float(np.var(values))
    if level == "dyad":
        return n * n * var
    if level == "node":
        return n * var
    raise ValueError(f"unknown level {level!r}")
