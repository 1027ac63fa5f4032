"""Construction of cyclic permutation families for randomization tests.

A cyclic family on n indices consists of the identity plus K powers of a
blockwise cyclic shift, conjugated by a random relabeling.  The non-trivial
facts used downstream: the family is a group (composition of members is a
member, with index arithmetic mod K+1), and when (K+1) divides n every
non-identity member moves every index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError
from .model import PermutationFamily, TwoWayPermutation
from .rng import AXIS_COLS, AXIS_ROWS, family_seed, generator


@dataclass(frozen=True)
class CyclicFamilySpec:
    """Parameters of one cyclic family: index-set size, K, and a seed."""

    n_indices: int
    num_perms: int
    seed: int

    def __post_init__(self):
        if self.n_indices < 1:
            raise DimensionError(f"need at least one index, got {self.n_indices}")
        if self.num_perms < 1:
            raise DimensionError(f"need at least one permutation, got {self.num_perms}")

    def build(self) -> np.ndarray:
        return build_cyclic_family(self.n_indices, self.num_perms, self.seed)


def _blockwise_shift(n: int, num_perms: int, k: int) -> np.ndarray:
    """The k-th canonical shift on 0-based [n].

    Indices past the last complete block of K+1 stay fixed.  Within a block,
    an index with residue r (1-based, residue 0 read as K+1) moves forward by
    k when r <= K+1-k and wraps back by K+1-k otherwise.
    """
    size = num_perms + 1
    m = size * (n // size)
    idx = np.arange(n)
    out = idx.copy()
    head = idx[:m]
    r0 = head % size  # r0 = r - 1 for the 1-based residue r in {1..K+1}
    forward = r0 <= num_perms - k
    out[:m] = np.where(forward, head + k, head - (size - k))
    return out


def build_cyclic_family(n: int, num_perms: int, seed) -> np.ndarray:
    """Build a cyclic family of K+1 bijections on 0-based [n].

    Parameters
    ----------
    n : int
        Size of the index set.
    num_perms : int
        K, the number of non-identity members.
    seed : int or numpy Generator / SeedSequence
        Drives the random relabeling that conjugates the canonical shifts.

    Returns
    -------
    ndarray of shape (K+1, n)
        Row k maps position x to its image; row 0 is the identity.
    """
    if n < 1:
        raise DimensionError(f"need at least one index, got {n}")
    if num_perms < 1:
        raise DimensionError(f"need at least one permutation, got {num_perms}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    relabel = rng.permutation(n)
    inverse = np.empty(n, dtype=np.intp)
    inverse[relabel] = np.arange(n)
    family = np.empty((num_perms + 1, n), dtype=np.intp)
    family[0] = np.arange(n)
    for k in range(1, num_perms + 1):
        shift = _blockwise_shift(n, num_perms, k)
        family[k] = inverse[shift[relabel]]
    return family


def build_two_way_group(n_rows: int, n_cols: int, num_perms: int, seed: int) -> PermutationFamily:
    """Two-way family: one cyclic family per axis, paired member by member.

    Member k is (pi_k, sigma_k); member 0 is the identity.  The row and
    column families draw from independent sub-streams of ``seed``.
    """
    rows = build_cyclic_family(n_rows, num_perms, family_seed(seed, 0, AXIS_ROWS))
    cols = build_cyclic_family(n_cols, num_perms, family_seed(seed, 0, AXIS_COLS))
    members = tuple(
        TwoWayPermutation(rows[k], cols[k]) for k in range(num_perms + 1)
    )
    return PermutationFamily(members)


def _one_axis_members(family) -> list[np.ndarray] | None:
    """Normalize a one-axis family to a list of index arrays, else None."""
    if isinstance(family, np.ndarray) and family.ndim == 2:
        return [family[k] for k in range(family.shape[0])]
    if isinstance(family, (list, tuple)) and family and not isinstance(family[0], TwoWayPermutation):
        return [np.asarray(m, dtype=np.intp) for m in family]
    return None


def verify_group(family) -> bool:
    """True iff the composition of any two members is again a member.

    Accepts a :class:`PermutationFamily`, a sequence of
    :class:`TwoWayPermutation`, or a (K+1, n) array / sequence of index
    arrays for a one-axis family.  Composition of two-way members is
    componentwise.
    """
    arrays = _one_axis_members(family)
    if arrays is not None:
        keys = {tuple(m.tolist()) for m in arrays}
        for g in arrays:
            for h in arrays:
                if tuple(g[h].tolist()) not in keys:
                    return False
        return True
    members = list(family)
    keys = {m.key() for m in members}
    for g in members:
        for h in members:
            if (tuple(g.pi[h.pi].tolist()), tuple(g.sigma[h.sigma].tolist())) not in keys:
                return False
    return True


def composition_law_holds(family) -> bool:
    """True iff member_r o member_s == member_((r+s) mod (K+1)) for all r, s."""
    arrays = _one_axis_members(family)
    if arrays is None:
        members = list(family)
        size = len(members)
        for r in range(size):
            for s in range(size):
                expect = members[(r + s) % size]
                got_pi = members[r].pi[members[s].pi]
                got_sg = members[r].sigma[members[s].sigma]
                if not (np.array_equal(got_pi, expect.pi) and np.array_equal(got_sg, expect.sigma)):
                    return False
        return True
    size = len(arrays)
    for r in range(size):
        for s in range(size):
            if not np.array_equal(arrays[r][arrays[s]], arrays[(r + s) % size]):
                return False
    return True


def fixed_point_free(family) -> bool:
    """True iff every non-identity member moves every index.

    For two-way members both the row and the column map must move every
    index of their respective axes.
    """
    arrays = _one_axis_members(family)
    if arrays is not None:
        n = arrays[0].shape[0]
        idx = np.arange(n)
        for m in arrays:
            if np.array_equal(m, idx):
                continue
            if np.any(m == idx):
                return False
        return True
    for member in family:
        if member.is_identity():
            continue
        if np.any(member.pi == np.arange(member.n_rows)):
            return False
        if np.any(member.sigma == np.arange(member.n_cols)):
            return False
    return True


def default_num_perms(n_rows: int, n_cols: int | None = None) -> int:
    """Default K: largest K <= 99 with K >= 19 and (K+1) dividing each extent.

    Falls back to 99 (tail indices stay fixed) when no such divisor exists.
    """
    if n_rows < 1 or (n_cols is not None and n_cols < 1):
        raise DimensionError("extents must be positive")
    extents = [n_rows] if n_cols is None else [n_rows, n_cols]
    for size in range(100, 19, -1):
        if all(ext % size == 0 for ext in extents):
            return size - 1
    return 99
