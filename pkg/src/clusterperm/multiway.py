"""Tests for designs beyond a single outcome per dyad.

Four layouts share the dyadic engine, differing only in which indices the
permutations may move:

* three-way: a full m x n x l box, permuting all three axes;
* panel: a full m x n x T box, permuting (i, j) identically in every period;
* layout: irregular per-cell observation counts, permuting only within cells;
* irregular: per-cell counts thresholded at L0, decomposed into fully
  eligible blocks, subsampled to exactly L0 slots, then treated like a
  blockwise panel; the whole pipeline repeats with derived seeds and the
  median p-value is reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dyadic import TestReport, median_pvalue, permutation_test
from .exceptions import (
    DimensionError,
    NoEligibleCellsError,
    UnbalancedError,
)
from .missing import BicliqueCover, biclique_decompose
from .permgroup import build_cyclic_family, default_num_perms
from .rng import (
    AXIS_CELLS,
    AXIS_COLS,
    AXIS_ROWS,
    family_seed,
    generator,
    run_seed,
    trim_seed,
)


@dataclass(frozen=True)
class MultiIndexDataset:
    """Observation records indexed by (i, j, l), all 0-based.

    ``l`` distinguishes repeated observations of the same cell: the third
    axis of a box design, the period of a panel, or just a slot number.
    """

    i: np.ndarray
    j: np.ndarray
    l: np.ndarray
    y: np.ndarray
    d: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        i = np.asarray(self.i, dtype=np.intp)
        j = np.asarray(self.j, dtype=np.intp)
        l = np.asarray(self.l, dtype=np.intp)
        y = np.asarray(self.y, dtype=float)
        d = np.asarray(self.d, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if d.ndim == 1:
            d = d[:, None]
        if x.ndim == 1:
            x = x[:, None]
        n_obs = y.shape[0]
        if n_obs < 1:
            raise DimensionError("dataset has no records")
        for name, arr in (("i", i), ("j", j), ("l", l)):
            if arr.shape != (n_obs,):
                raise DimensionError(f"column {name} must have shape ({n_obs},)")
            if arr.min() < 0:
                raise DimensionError(f"column {name} has negative indices")
        if d.shape[0] != n_obs or x.shape[0] != n_obs:
            raise DimensionError("d and x must have one row per record")
        for name, arr in (("i", i), ("j", j), ("l", l), ("y", y), ("d", d), ("x", x)):
            object.__setattr__(self, name, arr)

    @property
    def n_obs(self) -> int:
        return self.y.shape[0]

    @property
    def n_rows(self) -> int:
        return int(self.i.max()) + 1

    @property
    def n_cols(self) -> int:
        return int(self.j.max()) + 1

    @property
    def n_slots(self) -> int:
        return int(self.l.max()) + 1

    @property
    def d_dim(self) -> int:
        return self.d.shape[1]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def cell_sizes(self) -> np.ndarray:
        """Observation count per (i, j) cell."""
        sizes = np.zeros((self.n_rows, self.n_cols), dtype=np.intp)
        np.add.at(sizes, (self.i, self.j), 1)
        return sizes

    @classmethod
    def from_box(cls, y: np.ndarray, d: np.ndarray, x: np.ndarray) -> "MultiIndexDataset":
        """Build records from dense (m, n, l) grids."""
        y = np.asarray(y, dtype=float)
        if y.ndim != 3:
            raise DimensionError(f"box outcome must be 3-D, got shape {y.shape}")
        m, n, ell = y.shape
        d = np.asarray(d, dtype=float)
        if d.ndim == 3:
            d = d[..., None]
        x = np.asarray(x, dtype=float)
        if x.ndim == 3:
            x = x[..., None]
        if d.shape[:3] != (m, n, ell) or x.shape[:3] != (m, n, ell):
            raise DimensionError("box grids disagree on shape")
        ii, jj, ll = np.meshgrid(np.arange(m), np.arange(n), np.arange(ell), indexing="ij")
        return cls(
            i=ii.reshape(-1),
            j=jj.reshape(-1),
            l=ll.reshape(-1),
            y=y.reshape(-1),
            d=d.reshape(-1, d.shape[3]),
            x=x.reshape(-1, x.shape[3]),
        )


def _ordered_box(data: MultiIndexDataset):
    """Sort records lexicographically by (i, j, l) and demand a full box."""
    m, n, ell = data.n_rows, data.n_cols, data.n_slots
    total = m * n * ell
    if data.n_obs != total:
        raise UnbalancedError(
            f"balanced design needs {m}x{n}x{ell} = {total} records, got {data.n_obs}"
        )
    key = (data.i * n + data.j) * ell + data.l
    order = np.argsort(key)
    if not np.array_equal(key[order], np.arange(total)):
        raise UnbalancedError("records must fill the (i, j, l) box exactly once")
    return data.y[order], data.d[order], data.x[order], (m, n, ell)


def _box_perms(fams: list[np.ndarray], dims: tuple[int, int, int]) -> np.ndarray:
    m, n, ell = dims
    num = fams[0].shape[0]
    perms = np.empty((num, m * n * ell), dtype=np.intp)
    for k in range(num):
        grid = (fams[0][k][:, None, None] * n + fams[1][k][None, :, None]) * ell \
            + fams[2][k][None, None, :]
        perms[k] = grid.reshape(-1)
    return perms


def threeway_test(
    data: MultiIndexDataset,
    num_perms: int | None = None,
    seed: int = 0,
    tol: float | None = None,
) -> TestReport:
    """Randomization test on a full three-index box, permuting every axis.

    Valid when the error law is exchangeable separately in i, j, and l
    conditional on the design.
    """
    y, d, x, dims = _ordered_box(data)
    m, n, ell = dims
    if num_perms is None:
        num_perms = min(default_num_perms(m, n), default_num_perms(ell))
    fams = [
        build_cyclic_family(m, num_perms, family_seed(seed, 0, AXIS_ROWS)),
        build_cyclic_family(n, num_perms, family_seed(seed, 0, AXIS_COLS)),
        build_cyclic_family(ell, num_perms, family_seed(seed, 0, AXIS_CELLS)),
    ]
    return permutation_test(x, d, y, _box_perms(fams, dims), seed=seed, tol=tol)


def panel_test(
    data: MultiIndexDataset,
    num_perms: int | None = None,
    seed: int = 0,
    tol: float | None = None,
) -> TestReport:
    """Randomization test on a dyadic panel: (i, j) permute, periods do not.

    Because every period moves together, arbitrary deterministic period
    effects (trends, seasonality) cancel without being modeled.
    """
    y, d, x, dims = _ordered_box(data)
    m, n, ell = dims
    if num_perms is None:
        num_perms = default_num_perms(m, n)
    identity = np.tile(np.arange(ell), (num_perms + 1, 1))
    fams = [
        build_cyclic_family(m, num_perms, family_seed(seed, 0, AXIS_ROWS)),
        build_cyclic_family(n, num_perms, family_seed(seed, 0, AXIS_COLS)),
        identity,
    ]
    return permutation_test(x, d, y, _box_perms(fams, dims), seed=seed, tol=tol)


def _cells_in_order(data: MultiIndexDataset):
    """Record positions per occupied cell, cells lexicographic, records stable."""
    order = np.lexsort((np.arange(data.n_obs), data.l, data.j, data.i))
    i_sorted = data.i[order]
    j_sorted = data.j[order]
    cells = []
    start = 0
    for t in range(1, data.n_obs + 1):
        if t == data.n_obs or i_sorted[t] != i_sorted[start] or j_sorted[t] != j_sorted[start]:
            cells.append((int(i_sorted[start]), int(j_sorted[start]), order[start:t]))
            start = t
    return cells


def layout_test(
    data: MultiIndexDataset,
    num_perms: int,
    seed: int = 0,
    tol: float | None = None,
) -> TestReport:
    """Randomization test permuting observations only within their cells.

    Valid whenever observations of the same cell are exchangeable, even in
    the presence of arbitrary fixed cell effects.  Every cell of the grid
    must hold at least one record; cells shorter than K+1 keep their
    records fixed.
    """
    sizes = data.cell_sizes()
    if (sizes == 0).any():
        empty = int((sizes == 0).sum())
        raise UnbalancedError(
            f"{empty} cells have no records; use the irregular or missing-data paths"
        )
    cells = _cells_in_order(data)
    total = data.n_obs
    perms = np.empty((num_perms + 1, total), dtype=np.intp)
    offset = 0
    frozen = 0
    for i, j, positions in cells:
        size = positions.size
        fam = build_cyclic_family(
            size, num_perms, family_seed(seed, i * data.n_cols + j, AXIS_CELLS)
        )
        if size < num_perms + 1:
            frozen += 1
        for k in range(num_perms + 1):
            perms[k, offset : offset + size] = fam[k] + offset
        offset += size
    order = np.concatenate([positions for _, _, positions in cells])
    notes = []
    if frozen == len(cells):
        notes.append(
            f"every cell is shorter than K+1={num_perms + 1}; all permutations "
            "are the identity and the p-value is 1"
        )
    elif frozen:
        notes.append(
            f"{frozen} of {len(cells)} cells are shorter than K+1={num_perms + 1} "
            "and keep their records fixed"
        )
    return permutation_test(
        data.x[order], data.d[order], data.y[order], perms,
        seed=seed, tol=tol, notes=tuple(notes),
    )


@dataclass(frozen=True)
class IrregularResult:
    """Median-of-repeats outcome of the irregular-design pipeline."""

    pval: float
    runs: tuple[TestReport, ...]
    l0: int
    num_perms: int
    repeats: int
    seed: int
    eligible_cells: int

    def to_dict(self) -> dict:
        return {
            "pval": self.pval,
            "l0": self.l0,
            "num_perms": self.num_perms,
            "repeats": self.repeats,
            "seed": self.seed,
            "eligible_cells": self.eligible_cells,
            "run_pvals": [r.pval for r in self.runs],
        }


def suggest_cell_threshold(cell_sizes, candidates=None) -> int:
    """Pick L0 maximizing retained observations sum(1{l_ij >= L0} * L0).

    Ties go to the smaller threshold (more cells retained).
    """
    sizes = np.asarray(cell_sizes, dtype=np.intp).ravel()
    positive = np.unique(sizes[sizes > 0])
    if positive.size == 0:
        raise NoEligibleCellsError("no cell has any observations")
    if candidates is None:
        candidates = [int(v) for v in positive]
    best_l0, best_kept = None, -1
    for l0 in sorted(int(c) for c in candidates):
        if l0 < 1:
            continue
        kept = int((sizes >= l0).sum()) * l0
        if kept > best_kept:
            best_l0, best_kept = l0, kept
    if best_l0 is None:
        raise NoEligibleCellsError("no positive threshold candidate")
    return best_l0


def irregular_test(
    data: MultiIndexDataset,
    l0: int,
    num_perms: int,
    repeats: int = 100,
    seed: int = 0,
    solver: str = "auto",
    min_block: int = 2,
    cap: int = 16,
    restarts: int = 16,
    tol: float | None = None,
) -> IrregularResult:
    """Repeated blockwise test for cells with at least L0 observations.

    Pipeline per repeat: threshold the cell-size grid at L0, decompose the
    resulting mask into disjoint fully eligible blocks, subsample every
    retained cell to exactly L0 records (slots keep original record order),
    and permute block rows and columns with the L0 slots riding along.
    Reports the lower-median p-value across repeats.
    """
    if l0 < 1:
        raise DimensionError(f"l0 must be positive, got {l0}")
    if repeats < 1:
        raise DimensionError(f"repeats must be positive, got {repeats}")
    sizes = data.cell_sizes()
    mask = (sizes >= l0).astype(np.int8)
    eligible = int(mask.sum())
    if eligible == 0:
        raise NoEligibleCellsError(f"no cell holds at least l0={l0} observations")

    cells = {(i, j): positions for i, j, positions in _cells_in_order(data)}
    reports = []
    for r in range(repeats):
        rs = run_seed(seed, r)
        cover = biclique_decompose(
            mask, solver=solver, min_block=min_block, cap=cap,
            restarts=restarts, seed=rs,
        )
        if len(cover) == 0:
            raise NoEligibleCellsError(
                f"decomposition found no block with sides >= {min_block}"
            )
        reports.append(
            _trimmed_block_run(data, cells, cover, l0, num_perms, rs, tol)
        )
    return IrregularResult(
        pval=median_pvalue([report.pval for report in reports]),
        runs=tuple(reports),
        l0=l0,
        num_perms=num_perms,
        repeats=repeats,
        seed=seed,
        eligible_cells=eligible,
    )


def _trimmed_block_run(
    data: MultiIndexDataset,
    cells: dict,
    cover: BicliqueCover,
    l0: int,
    num_perms: int,
    rs: int,
    tol: float | None,
) -> TestReport:
    rng = generator(trim_seed(rs))
    picked = []
    for rows, cols in cover.blocks:
        for i in rows:
            for j in cols:
                positions = cells[(i, j)]
                keep = np.sort(rng.choice(positions.size, size=l0, replace=False))
                picked.append(positions[keep])
    order = np.concatenate(picked)

    total = cover.cell_count * l0
    perms = np.empty((num_perms + 1, total), dtype=np.intp)
    offset = 0
    slots = np.arange(l0)
    for q, (rows, cols) in enumerate(cover.blocks):
        row_fam = build_cyclic_family(len(rows), num_perms, family_seed(rs, q, AXIS_ROWS))
        col_fam = build_cyclic_family(len(cols), num_perms, family_seed(rs, q, AXIS_COLS))
        block_n = len(rows) * len(cols) * l0
        for k in range(num_perms + 1):
            grid = (row_fam[k][:, None, None] * len(cols) + col_fam[k][None, :, None]) * l0 \
                + slots[None, None, :]
            perms[k, offset : offset + block_n] = grid.reshape(-1) + offset
        offset += block_n
    sides = cover.sides()
    notes = []
    if any(min(nr, nc) < num_perms + 1 for nr, nc in sides):
        notes.append(
            f"some blocks have a side shorter than K+1={num_perms + 1}; "
            "their indices stay fixed"
        )
    return permutation_test(
        data.x[order], data.d[order], data.y[order], perms,
        seed=rs, tol=tol, notes=tuple(notes),
    )
