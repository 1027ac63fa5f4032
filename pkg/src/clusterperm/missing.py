"""Missing data via biclique decomposition.

When some cells of the grid are unobserved, valid randomization requires
fully observed rectangular blocks with pairwise-disjoint row sets and
pairwise-disjoint column sets.  The decomposition greedily extracts a
maximum-edge biclique (exactly, below a size cap, or heuristically above
it), then removes all of its rows and columns from the mask, which is what
guarantees disjointness.  The blockwise test permutes rows and columns
within each block and leaves everything else fixed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dyadic import TestReport, permutation_test
from .exceptions import (
    CapExceededError,
    DimensionError,
    EmptyMaskError,
    MissingDataError,
)
from .model import DyadArray
from .permgroup import build_cyclic_family
from .rng import AXIS_COLS, AXIS_ROWS, family_seed, mask_seed

EXACT_CAP = 16


def as_mask(mask) -> np.ndarray:
    """Validate and normalize a mask to a 2-D 0/1 int8 array."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise DimensionError(f"mask must be 2-D, got shape {arr.shape}")
    values = np.unique(arr)
    if not np.isin(values, (0, 1, True, False)).all():
        raise DimensionError("mask entries must be 0 or 1")
    return arr.astype(np.int8)


def _subset_tables(mask_bool: np.ndarray):
    """Subset-sum tables for exact enumeration over occupied rows.

    Returns (occupied_rows, row_counts, col_counts, common) where entry S of
    ``common`` is the bitmask of columns shared by the rows selected by S.
    """
    occupied = np.flatnonzero(mask_bool.any(axis=1))
    n_cols = mask_bool.shape[1]
    weights = (np.uint32(1) << np.arange(n_cols, dtype=np.uint32))
    row_bits = [np.uint32((mask_bool[r] * weights).sum(dtype=np.uint64)) for r in occupied]
    size = 1 << occupied.size
    common = np.zeros(size, dtype=np.uint32)
    common[0] = np.uint32((1 << n_cols) - 1)
    for b in range(occupied.size):
        lo = 1 << b
        common[lo : 2 * lo] = common[:lo] & row_bits[b]
    subsets = np.arange(size, dtype=np.uint32)
    row_counts = np.bitwise_count(subsets).astype(np.int64)
    col_counts = np.bitwise_count(common).astype(np.int64)
    return occupied, row_counts, col_counts, common


def _decode_bits(value: int, lookup: np.ndarray | None = None) -> tuple[int, ...]:
    out = []
    b = 0
    v = int(value)
    while v:
        if v & 1:
            out.append(int(lookup[b]) if lookup is not None else b)
        v >>= 1
        b += 1
    return tuple(out)


def _check_cap(mask: np.ndarray, cap: int):
    if mask.shape[0] > cap or mask.shape[1] > cap:
        raise CapExceededError(
            f"exact solver accepts at most {cap}x{cap} masks, got "
            f"{mask.shape[0]}x{mask.shape[1]}"
        )


def max_biclique_exact(mask, cap: int = EXACT_CAP, min_side: int = 1):
    """Exact maximum-edge biclique of a 0/1 mask.

    Enumerates row subsets (restricted to occupied rows), pairing each with
    its full common-neighbor column set.  Ties break toward more rows, then
    the lexicographically smallest row set.

    Returns (rows, cols) as sorted index tuples, or None when no block has
    both sides >= ``min_side``.  Raises :class:`CapExceededError` above the
    cap and :class:`EmptyMaskError` for an all-zero mask.
    """
    mask = as_mask(mask)
    _check_cap(mask, cap)
    mask_bool = mask.astype(bool)
    if not mask_bool.any():
        raise EmptyMaskError("mask has no observed cells")
    occupied, row_counts, col_counts, common = _subset_tables(mask_bool)
    scores = row_counts * col_counts
    valid = (row_counts >= min_side) & (col_counts >= min_side)
    valid[0] = False
    if not valid.any():
        return None
    best_score = scores[valid].max()
    cands = np.flatnonzero(valid & (scores == best_score))
    most_rows = row_counts[cands].max()
    cands = cands[row_counts[cands] == most_rows]
    best = min((_decode_bits(int(s), occupied), int(s)) for s in cands)[1]
    rows = _decode_bits(best, occupied)
    cols = _decode_bits(int(common[best]))
    return rows, cols


def max_square_side(mask, cap: int = EXACT_CAP) -> int:
    """Largest s such that an s x s fully observed block exists (exact)."""
    mask = as_mask(mask)
    _check_cap(mask, cap)
    mask_bool = mask.astype(bool)
    if not mask_bool.any():
        return 0
    _, row_counts, col_counts, _ = _subset_tables(mask_bool)
    sides = np.minimum(row_counts, col_counts)
    sides[0] = 0
    return int(sides.max())


def _common_cols(mask_bool: np.ndarray, rows) -> np.ndarray:
    return np.logical_and.reduce(mask_bool[list(rows)], axis=0)


def _candidate_key(score: int, rows: tuple, cols: tuple):
    return (-score, -len(rows), rows, cols)


def max_biclique_greedy(mask, restarts: int = 16, seed: int = 0, min_side: int = 1):
    """Seeded greedy maximum-edge biclique heuristic.

    Each restart orders rows by degree (random tie-break), scores every
    prefix against its common-neighbor column set, then applies single-row
    add/remove/swap moves to a local optimum.  Deterministic given ``seed``.

    Returns (rows, cols) or None when ``min_side`` cannot be met.
    """
    mask = as_mask(mask)
    mask_bool = mask.astype(bool)
    degrees = mask_bool.sum(axis=1)
    active = np.flatnonzero(degrees > 0)
    if active.size == 0:
        raise EmptyMaskError("mask has no observed cells")
    best = None

    for t in range(restarts):
        rng_noise = np.random.default_rng(mask_seed(seed, 7, t)).random(active.size)
        order = active[np.lexsort((rng_noise, -degrees[active]))]
        common = np.ones(mask_bool.shape[1], dtype=bool)
        chosen: list[int] = []
        start = None
        for r in order:
            new_common = common & mask_bool[r]
            count = int(new_common.sum())
            if count == 0:
                break
            chosen.append(int(r))
            common = new_common
            if len(chosen) >= min_side and count >= min_side:
                score = len(chosen) * count
                if start is None or score > start[0]:
                    start = (score, set(chosen), common.copy())
        if start is None:
            continue
        _, rows_set, _ = start
        rows_set = set(rows_set)
        guard = 0
        while guard < 200:
            guard += 1
            common = _common_cols(mask_bool, rows_set)
            score = len(rows_set) * int(common.sum())
            move = None
            for r in active:
                if r in rows_set:
                    continue
                new_cols = int((common & mask_bool[r]).sum())
                if new_cols >= min_side and (len(rows_set) + 1) * new_cols > score:
                    move = ("add", int(r), None)
                    break
            if move is None and len(rows_set) > min_side:
                for r in sorted(rows_set):
                    rest = rows_set - {r}
                    new_cols = int(_common_cols(mask_bool, rest).sum())
                    if new_cols >= min_side and (len(rows_set) - 1) * new_cols > score:
                        move = ("remove", r, None)
                        break
            if move is None:
                for r_out in sorted(rows_set):
                    base = _common_cols(mask_bool, rows_set - {r_out})
                    for r_in in active:
                        if r_in in rows_set:
                            continue
                        new_cols = int((base & mask_bool[r_in]).sum())
                        if new_cols >= min_side and len(rows_set) * new_cols > score:
                            move = ("swap", r_out, int(r_in))
                            break
                    if move is not None:
                        break
            if move is None:
                break
            kind, first, second = move
            if kind == "add":
                rows_set.add(first)
            elif kind == "remove":
                rows_set.discard(first)
            else:
                rows_set.discard(first)
                rows_set.add(second)
        common = _common_cols(mask_bool, rows_set)
        rows = tuple(sorted(int(r) for r in rows_set))
        cols = tuple(int(c) for c in np.flatnonzero(common))
        if len(rows) < min_side or len(cols) < min_side:
            continue
        key = _candidate_key(len(rows) * len(cols), rows, cols)
        if best is None or key < best[0]:
            best = (key, (rows, cols))
    return None if best is None else best[1]


@dataclass(frozen=True)
class BicliqueCover:
    """Fully observed blocks with disjoint row sets and disjoint column sets."""

    blocks: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    n_rows: int
    n_cols: int

    def __post_init__(self):
        seen_rows: set[int] = set()
        seen_cols: set[int] = set()
        norm = []
        for rows, cols in self.blocks:
            rows = tuple(sorted(int(r) for r in rows))
            cols = tuple(sorted(int(c) for c in cols))
            if not rows or not cols:
                raise DimensionError("cover blocks must be non-empty on both sides")
            if rows[0] < 0 or rows[-1] >= self.n_rows or cols[0] < 0 or cols[-1] >= self.n_cols:
                raise DimensionError("cover block indices outside the grid")
            if seen_rows & set(rows) or seen_cols & set(cols):
                raise DimensionError("cover blocks must have disjoint rows and columns")
            seen_rows |= set(rows)
            seen_cols |= set(cols)
            norm.append((rows, cols))
        object.__setattr__(self, "blocks", tuple(norm))

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def cell_count(self) -> int:
        return sum(len(r) * len(c) for r, c in self.blocks)

    def sides(self) -> list[tuple[int, int]]:
        return [(len(r), len(c)) for r, c in self.blocks]

    def check_observed(self, mask) -> None:
        """Raise unless every block cell is observed in ``mask``."""
        arr = as_mask(mask)
        if arr.shape != (self.n_rows, self.n_cols):
            raise DimensionError(
                f"mask shape {arr.shape} does not match cover grid "
                f"({self.n_rows}, {self.n_cols})"
            )
        for rows, cols in self.blocks:
            if not arr[np.ix_(rows, cols)].all():
                raise MissingDataError(
                    f"cover block rows={rows} cols={cols} is not fully observed"
                )

    def to_dict(self) -> dict:
        # 1-based indices at the boundary, matching the file formats.
        return {
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "cell_count": self.cell_count,
            "blocks": [
                {"rows": [r + 1 for r in rows], "cols": [c + 1 for c in cols]}
                for rows, cols in self.blocks
            ],
        }


def biclique_decompose(
    mask,
    solver: str = "auto",
    min_block: int = 2,
    cap: int = EXACT_CAP,
    restarts: int = 16,
    seed: int = 0,
) -> BicliqueCover:
    """Iteratively extract maximum bicliques into a disjoint cover.

    Each round finds the largest block whose sides are both >= ``min_block``
    and then zeroes every row and column the block touches, so later blocks
    cannot share either axis with it.  Stops when no eligible block remains.
    """
    work = as_mask(mask).astype(bool)
    n_rows, n_cols = work.shape
    if not work.any():
        raise EmptyMaskError("mask has no observed cells")
    if solver not in ("auto", "exact", "greedy"):
        raise ValueError(f"unknown solver {solver!r}")
    use_exact = solver == "exact" or (
        solver == "auto" and n_rows <= cap and n_cols <= cap
    )
    if min_block < 1:
        raise DimensionError("min_block must be at least 1")

    blocks = []
    round_no = 0
    while work.any():
        if use_exact:
            found = max_biclique_exact(work.astype(np.int8), cap=cap, min_side=min_block)
        else:
            found = max_biclique_greedy(
                work.astype(np.int8),
                restarts=restarts,
                seed=mask_seed(seed, 9, round_no),
                min_side=min_block,
            )
        if found is None:
            break
        rows, cols = found
        blocks.append((rows, cols))
        work[list(rows), :] = False
        work[:, list(cols)] = False
        round_no += 1
    return BicliqueCover(tuple(blocks), n_rows, n_cols)


def blockwise_test(
    array: DyadArray,
    mask,
    cover: BicliqueCover,
    num_perms: int,
    seed: int = 0,
    tol: float | None = None,
) -> TestReport:
    """Randomization test on the stacked cells of a biclique cover.

    Rows and columns are permuted within each block by independent cyclic
    families sharing the member index; cells outside the cover stay fixed
    (they never enter the stacked data).  Blocks with a side shorter than
    K+1 keep those indices fixed, which is valid but contributes little.
    """
    mask = as_mask(mask)
    if mask.shape != (array.n_rows, array.n_cols):
        raise DimensionError(
            f"mask shape {mask.shape} does not match array grid "
            f"({array.n_rows}, {array.n_cols})"
        )
    cover.check_observed(mask)
    cover.check_observed(array.observed.astype(np.int8))

    notes: list[str] = []
    short = [q for q, (nr, nc) in enumerate(cover.sides()) if min(nr, nc) < num_perms + 1]
    if short:
        message = (
            f"{len(short)} of {len(cover)} blocks have a side shorter than "
            f"K+1={num_perms + 1}; their indices stay fixed"
        )
        warnings.warn(message)
        notes.append(message)

    y_parts, d_parts, x_parts = [], [], []
    for rows, cols in cover.blocks:
        sub = np.ix_(rows, cols)
        cells = len(rows) * len(cols)
        y_parts.append(array.y[sub].reshape(cells))
        d_parts.append(array.d[sub].reshape(cells, array.d_dim))
        x_parts.append(array.x[sub].reshape(cells, array.p))
    y = np.concatenate(y_parts)
    d = np.vstack(d_parts)
    x = np.vstack(x_parts)

    total = cover.cell_count
    perms = np.empty((num_perms + 1, total), dtype=np.intp)
    offset = 0
    for q, (rows, cols) in enumerate(cover.blocks):
        row_fam = build_cyclic_family(len(rows), num_perms, family_seed(seed, q, AXIS_ROWS))
        col_fam = build_cyclic_family(len(cols), num_perms, family_seed(seed, q, AXIS_COLS))
        cells = len(rows) * len(cols)
        for k in range(num_perms + 1):
            local = row_fam[k][:, None] * len(cols) + col_fam[k][None, :]
            perms[k, offset : offset + cells] = local.reshape(cells) + offset
        offset += cells
    return permutation_test(x, d, y, perms, seed=seed, tol=tol, notes=tuple(notes))
