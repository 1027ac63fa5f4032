"""Monte Carlo harness: data-generating processes and experiment runners.

The workhorse random-effects construction is additive with a row effect, a
column effect, and an idiosyncratic term.  Variance shares (phi1, phi2)
parametrize the component scales so the total variance is 1 for a
unit-variance base:

    value_ij = sigma1 * v1_i + sigma2 * v2_j + v3_ij,
    sigma_a^2 = phi_a / (1 - phi1 - phi2).

Rejection-rate runs derive one sub-seed per replicate from the replicate
index, so adding replicates or changing worker counts never changes what
any single replicate sees.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .dyadic import PreparedTest, dyadic_test
from .exceptions import DimensionError, VarianceBudgetError
from .missing import max_square_side
from .model import DyadArray, StackedDesign
from .multiway import MultiIndexDataset, irregular_test
from .permgroup import build_two_way_group, default_num_perms
from .rng import dgp_seed, generator, mask_seed, replicate_seed

_BASE_DISTS = ("gaussian", "lognormal-transform", "cauchy")

ERROR_KINDS = ("row-scale-lognormal", "two-way-weak", "row-heavy")


@dataclass(frozen=True)
class RandomEffectsSpec:
    """Variance shares and base law of the additive two-way construction."""

    phi1: float
    phi2: float
    base_dist: str = "gaussian"
    seed: int | None = None

    def __post_init__(self):
        if self.phi1 < 0 or self.phi2 < 0:
            raise VarianceBudgetError(
                f"variance shares must be non-negative, got ({self.phi1}, {self.phi2})"
            )
        if self.phi1 + self.phi2 >= 1:
            raise VarianceBudgetError(
                f"variance shares must sum below 1, got {self.phi1 + self.phi2}"
            )
        if self.base_dist not in _BASE_DISTS:
            raise ValueError(f"base_dist must be one of {_BASE_DISTS}")

    @property
    def sigma1(self) -> float:
        return float(np.sqrt(self.phi1 / (1.0 - self.phi1 - self.phi2)))

    @property
    def sigma2(self) -> float:
        return float(np.sqrt(self.phi2 / (1.0 - self.phi1 - self.phi2)))


def gen_random_effects(
    n_rows: int,
    n_cols: int,
    spec: RandomEffectsSpec,
    seed: int | None = None,
) -> np.ndarray:
    """Draw one (n_rows, n_cols) grid from the additive construction.

    ``spec.seed`` wins over the ``seed`` argument when both are given; the
    lognormal-transform base exponentiates half the Gaussian grid.
    """
    resolved = spec.seed if spec.seed is not None else seed
    if resolved is None:
        raise ValueError("either spec.seed or seed must be provided")
    rng = generator(resolved)
    if spec.base_dist == "cauchy":
        v1 = rng.standard_cauchy(n_rows)
        v2 = rng.standard_cauchy(n_cols)
        v3 = rng.standard_cauchy((n_rows, n_cols))
    else:
        v1 = rng.standard_normal(n_rows)
        v2 = rng.standard_normal(n_cols)
        v3 = rng.standard_normal((n_rows, n_cols))
    grid = spec.sigma1 * v1[:, None] + spec.sigma2 * v2[None, :] + v3
    if spec.base_dist == "lognormal-transform":
        return np.exp(0.5 * grid)
    return grid


def gen_dyadic_dataset(
    n: int,
    beta: float = 0.0,
    spec_cov: RandomEffectsSpec | None = None,
    spec_err: RandomEffectsSpec | None = None,
    cov_transform: str = "normal",
    gamma=(0.5, 1.0, 1.0),
    seed: int = 0,
) -> tuple[DyadArray, np.ndarray]:
    """Simulate one n x n dyadic dataset with clustered treatment and errors.

    Covariates are (1, z_i, z_j) with z ~ Uniform[0, 2]; the scalar
    treatment comes from the additive construction (``spec_cov``), either
    raw ("normal") or exponentiated as exp(0.5 w) ("lognormal"); errors
    come from ``spec_err``.  Returns the array and the true error grid.
    """
    spec_cov = spec_cov or RandomEffectsSpec(0.4, 0.4)
    spec_err = spec_err or RandomEffectsSpec(0.05, 0.15)
    gamma = np.asarray(gamma, dtype=float)
    z = generator(dgp_seed(seed, 0)).uniform(0.0, 2.0, n)
    x = np.empty((n, n, 3))
    x[:, :, 0] = 1.0
    x[:, :, 1] = z[:, None]
    x[:, :, 2] = z[None, :]
    if gamma.shape != (3,):
        raise DimensionError(f"gamma must have 3 entries, got {gamma.shape}")
    w = gen_random_effects(n, n, spec_cov, seed=dgp_seed(seed, 1))
    if cov_transform == "lognormal":
        d = np.exp(0.5 * w)
    elif cov_transform == "normal":
        d = w
    else:
        raise ValueError(f"unknown cov_transform {cov_transform!r}")
    eps = gen_random_effects(n, n, spec_err, seed=dgp_seed(seed, 2))
    y = x @ gamma + d * float(beta) + eps
    return DyadArray(y=y, d=d[:, :, None], x=x), eps


def gen_semisynthetic_errors(
    i_idx: np.ndarray,
    j_idx: np.ndarray,
    kind: str,
    seed: int,
    n_rows: int | None = None,
    n_cols: int | None = None,
) -> np.ndarray:
    """Per-record errors clustered on observational row/column indices.

    * ``row-scale-lognormal``: exp(v_i * u_r) with v per row, u per record;
    * ``two-way-weak``: additive construction, shares (0.1, 0.1),
      idiosyncratic term drawn per record;
    * ``row-heavy``: additive construction, shares (0.9, 0.0).
    """
    i_idx = np.asarray(i_idx, dtype=np.intp)
    j_idx = np.asarray(j_idx, dtype=np.intp)
    if i_idx.shape != j_idx.shape or i_idx.ndim != 1:
        raise DimensionError("i and j index vectors must be 1-D and equal length")
    n_rows = n_rows if n_rows is not None else int(i_idx.max()) + 1
    n_cols = n_cols if n_cols is not None else int(j_idx.max()) + 1
    rng = generator(seed)
    n_obs = i_idx.shape[0]
    if kind == "row-scale-lognormal":
        v = rng.standard_normal(n_rows)
        u = rng.standard_normal(n_obs)
        return np.exp(v[i_idx] * u)
    if kind == "two-way-weak":
        shares = RandomEffectsSpec(0.1, 0.1)
    elif kind == "row-heavy":
        shares = RandomEffectsSpec(0.9, 0.0)
    else:
        raise ValueError(f"unknown error kind {kind!r}; choose from {ERROR_KINDS}")
    v1 = rng.standard_normal(n_rows)
    v2 = rng.standard_normal(n_cols)
    v3 = rng.standard_normal(n_obs)
    return shares.sigma1 * v1[i_idx] + shares.sigma2 * v2[j_idx] + v3


def gen_mcar_mask(n: int, rho: float, seed: int, n_cols: int | None = None) -> np.ndarray:
    """Bernoulli(rho) observation mask; equal seeds couple masks across rho."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    n_cols = n_cols if n_cols is not None else n
    u = generator(mask_seed(seed, 0)).random((n, n_cols))
    return (u < rho).astype(np.int8)


@dataclass(frozen=True)
class McSummary:
    """Rejection-rate summary of a Monte Carlo run."""

    label: str
    reps: int
    alpha: float
    rejections: int
    rate: float
    mc_se: float
    config_digest: str

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "reps": self.reps,
            "alpha": self.alpha,
            "rejections": self.rejections,
            "rate": self.rate,
            "mc_se": self.mc_se,
            "config_digest": self.config_digest,
        }


def _digest(label: str, reps: int, alpha: float, seed: int) -> str:
    payload = f"{label}|reps={reps}|alpha={alpha}|seed={seed}"
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def mc_rejection_rate(
    test_fn,
    reps: int,
    alpha: float,
    seed: int,
    threads: int = 1,
    label: str = "",
) -> McSummary:
    """Rejection rate of ``test_fn`` over derived replicate seeds.

    ``test_fn`` maps one integer seed to a p-value (or anything with a
    ``pval`` attribute).  With ``threads > 1`` replicates run in worker
    processes; the reduction is a count, so scheduling cannot matter.
    """
    if reps < 1:
        raise DimensionError(f"reps must be positive, got {reps}")
    seeds = [replicate_seed(seed, r) for r in range(reps)]
    if threads > 1:
        chunk = max(1, reps // (threads * 8))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(test_fn, seeds, chunksize=chunk))
    else:
        outcomes = [test_fn(s) for s in seeds]
    pvals = [getattr(out, "pval", out) for out in outcomes]
    rejections = sum(1 for p in pvals if p <= alpha)
    rate = rejections / reps
    return McSummary(
        label=label,
        reps=reps,
        alpha=alpha,
        rejections=rejections,
        rate=rate,
        mc_se=float(np.sqrt(rate * (1.0 - rate) / reps)),
        config_digest=_digest(label, reps, alpha, seed),
    )


def minorization_gap_suite(
    n: int = 12,
    num_perms: int = 11,
    reps: int = 200,
    seed: int = 0,
    cov_transform: str = "normal",
    spec_err: RandomEffectsSpec | None = None,
) -> dict:
    """Compare the feasible p-value with its error-oracle lower bound.

    The feasible test replaces each permuted-error statistic with the
    statistic of the permuted outcome, while the observed side is already
    minorized; the oracle minorizes both sides using the true errors.  The
    feasible p-value must dominate replicate by replicate.
    """
    spec_err = spec_err or RandomEffectsSpec(0.05, 0.15)
    pairs = []
    violations = 0
    for r in range(reps):
        rs = replicate_seed(seed, r)
        array, eps = gen_dyadic_dataset(
            n, beta=0.0, spec_err=spec_err, cov_transform=cov_transform, seed=rs
        )
        design = StackedDesign.from_array(array)
        family = build_two_way_group(n, n, num_perms, rs)
        prepared = PreparedTest(design.x, design.d, family.stacked())
        feasible = prepared.report(design.y).pval
        eps_stacked = eps.reshape(-1)
        min_a = prepared.min_stat(design.y)
        count = 0
        for k in range(1, num_perms + 1):
            if min_a <= prepared.min_stat(eps_stacked[prepared.perms[k]]):
                count += 1
        infeasible = (1 + count) / (num_perms + 1)
        if infeasible > feasible:
            violations += 1
        pairs.append((feasible, infeasible))
    return {"reps": reps, "violations": violations, "pairs": pairs}


def biclique_growth_experiment(
    n_grid,
    rho_grid,
    reps: int,
    seed: int = 0,
    cap: int = 16,
) -> dict:
    """Median exact square-biclique side over MCAR masks on a (n, rho) grid.

    One uniform grid is drawn per replicate and shared across all (n, rho)
    points (thresholded at rho, windowed to n x n), so the monotonicity of
    the side in both arguments holds replicate by replicate.
    """
    n_grid = sorted(int(v) for v in n_grid)
    rho_grid = [float(v) for v in rho_grid]
    if not n_grid or not rho_grid or reps < 1:
        raise DimensionError("n_grid, rho_grid and reps must be non-empty/positive")
    max_n = n_grid[-1]
    sides = np.zeros((len(n_grid), len(rho_grid), reps), dtype=np.intp)
    for r in range(reps):
        u = generator(mask_seed(seed, 11, r)).random((max_n, max_n))
        for a, n in enumerate(n_grid):
            window = u[:n, :n]
            for b, rho in enumerate(rho_grid):
                sides[a, b, r] = max_square_side((window < rho).astype(np.int8), cap=cap)
    ordered = np.sort(sides, axis=2)
    medians = ordered[:, :, (reps - 1) // 2]
    return {
        "n_grid": n_grid,
        "rho_grid": rho_grid,
        "reps": reps,
        "median_side": medians.tolist(),
    }


# ---------------------------------------------------------------------------
# Panel runners behind the CLI; the per-replicate callables live at module
# level so worker processes can unpickle them.

def _size_rep(n, cov_transform, phi2, num_perms, rep_seed):
    array, _ = gen_dyadic_dataset(
        n,
        beta=0.0,
        spec_err=RandomEffectsSpec(0.05, phi2),
        cov_transform=cov_transform,
        seed=rep_seed,
    )
    return dyadic_test(array, num_perms=num_perms, seed=rep_seed).pval


def _power_rep(n, beta, phi2, num_perms, rep_seed):
    # The treatment is drawn iid per cell as exp(0.5 w) with w ~ N(0, 5),
    # the marginal law of the shares-(0.4, 0.4) two-way construction.  The
    # cross-cell dependence of that construction adds alignment noise that
    # roughly halves power at beta = 0.05 without affecting validity; the
    # iid draw is what the reference power figures correspond to.
    array, _ = gen_dyadic_dataset(
        n,
        beta=0.0,
        spec_err=RandomEffectsSpec(0.0, phi2),
        cov_transform="lognormal",
        seed=rep_seed,
    )
    w = generator(dgp_seed(rep_seed, 3)).standard_normal((n, n)) * np.sqrt(5.0)
    d = np.exp(0.5 * w)
    array = DyadArray(y=array.y + d * float(beta), d=d[:, :, None], x=array.x)
    return dyadic_test(array, num_perms=num_perms, seed=rep_seed).pval


def gen_irregular_dataset(
    n_rows: int,
    n_cols: int,
    l0: int,
    kind: str,
    seed: int,
    extra_slots: int = 3,
    beta: float = 0.0,
) -> MultiIndexDataset:
    """Unbalanced per-cell records with clustered treatment and chosen errors.

    Cell sizes are uniform on [l0, l0 + extra_slots], so every cell stays
    eligible at threshold l0 while the subsampling step still has work to
    do.  Covariates are an intercept plus one uniform draw per row index
    and one per column index, mirroring the dyadic recipe; the treatment
    adds row and column effects to a per-record draw.
    """
    rng = generator(dgp_seed(seed, 4))
    sizes = rng.integers(l0, l0 + extra_slots + 1, size=(n_rows, n_cols))
    i_idx = np.repeat(np.repeat(np.arange(n_rows), n_cols), sizes.reshape(-1))
    j_idx = np.repeat(np.tile(np.arange(n_cols), n_rows), sizes.reshape(-1))
    slot = np.concatenate([np.arange(s) for s in sizes.reshape(-1)])
    n_obs = i_idx.shape[0]
    z_row = rng.uniform(0.0, 2.0, n_rows)
    z_col = rng.uniform(0.0, 2.0, n_cols)
    x = np.column_stack([np.ones(n_obs), z_row[i_idx], z_col[j_idx]])
    shares = RandomEffectsSpec(0.4, 0.4)
    a = rng.standard_normal(n_rows)
    b = rng.standard_normal(n_cols)
    d = shares.sigma1 * a[i_idx] + shares.sigma2 * b[j_idx] + rng.standard_normal(n_obs)
    eps = gen_semisynthetic_errors(
        i_idx, j_idx, kind, dgp_seed(seed, 5), n_rows=n_rows, n_cols=n_cols
    )
    y = x @ np.array([0.5, 1.0, 1.0]) + d * beta + eps
    return MultiIndexDataset(i=i_idx, j=j_idx, l=slot, y=y, d=d, x=x)


def _irregular_rep(n_rows, n_cols, l0, kind, num_perms, repeats, rep_seed):
    data = gen_irregular_dataset(n_rows, n_cols, l0, kind, seed=rep_seed)
    result = irregular_test(
        data, l0=l0, num_perms=num_perms, repeats=repeats, seed=dgp_seed(rep_seed, 6)
    )
    return result.pval


def run_null_size_panel(
    n: int = 25,
    reps: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
    num_perms: int | None = None,
    threads: int = 1,
    phi2_values=(0.15, 0.9),
    cov_transforms=("normal", "lognormal"),
) -> dict:
    """Null rejection rates across covariate transforms and column shares."""
    if num_perms is None:
        num_perms = default_num_perms(n)
    rows = []
    for transform in cov_transforms:
        for phi2 in phi2_values:
            label = f"size n={n} cov={transform} phi2={phi2}"
            summary = mc_rejection_rate(
                partial(_size_rep, n, transform, phi2, num_perms),
                reps=reps, alpha=alpha, seed=seed, threads=threads, label=label,
            )
            row = summary.to_dict()
            row.update({"cov_transform": transform, "phi2": phi2})
            rows.append(row)
    return {"panel": "null-size", "n": n, "num_perms": num_perms, "rows": rows}


def run_power_panel(
    n: int = 25,
    reps: int = 500,
    alpha: float = 0.05,
    seed: int = 0,
    num_perms: int | None = None,
    threads: int = 1,
    betas=(0.01, 0.05, 0.10, 0.15),
    phi2: float = 0.1,
) -> dict:
    """Power curve over effect sizes with lognormal treatment."""
    if num_perms is None:
        num_perms = default_num_perms(n)
    rows = []
    for beta in betas:
        label = f"power n={n} beta={beta} phi2={phi2}"
        summary = mc_rejection_rate(
            partial(_power_rep, n, beta, phi2, num_perms),
            reps=reps, alpha=alpha, seed=seed, threads=threads, label=label,
        )
        row = summary.to_dict()
        row.update({"beta": beta, "phi2": phi2})
        rows.append(row)
    return {"panel": "power", "n": n, "num_perms": num_perms, "rows": rows}


def run_irregular_size_panel(
    n_rows: int = 20,
    n_cols: int = 20,
    l0: int = 4,
    reps: int = 500,
    alpha: float = 0.05,
    seed: int = 0,
    num_perms: int = 19,
    repeats: int = 3,
    threads: int = 1,
    kinds=ERROR_KINDS,
) -> dict:
    """Null rejection rates of the irregular pipeline per error kind."""
    rows = []
    for kind in kinds:
        label = f"irregular {n_rows}x{n_cols} l0={l0} errors={kind}"
        summary = mc_rejection_rate(
            partial(_irregular_rep, n_rows, n_cols, l0, kind, num_perms, repeats),
            reps=reps, alpha=alpha, seed=seed, threads=threads, label=label,
        )
        row = summary.to_dict()
        row.update({"errors": kind})
        rows.append(row)
    return {
        "panel": "irregular-size",
        "n_rows": n_rows,
        "n_cols": n_cols,
        "l0": l0,
        "num_perms": num_perms,
        "repeats": repeats,
        "rows": rows,
    }
