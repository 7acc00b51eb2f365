"""Generalized eigenproblem A e = β Gm e and the checks built on it.

Gm is positive semidefinite with a large null space, so the pencil is
reduced through the Cholesky factor of A: with A = L Lᵀ the matrix
C = L⁻¹ Gm L⁻ᵀ is symmetric PSD and its eigenvalues are θ = 1/β.
Null directions of Gm give θ = 0 (β = ∞) and are dropped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import eigh, solve_triangular

from .constants import beta0_formula, spectral_setup
from .discretization import SpectralBasis, assemble_forms, basis_for, sine_overlap_1d
from .errors import InsufficientRange, PrerequisiteFailed, UndefinedForm
from .model_config import Box, ProblemParams

CLUSTER_RTOL = 1e-6
_THETA_RTOL = 1e-13


@dataclass(frozen=True)
class EigenPair:
    beta: float
    coeffs: np.ndarray
    residual: float


@dataclass(frozen=True)
class SpectralDecomposition:
    pairs: tuple[EigenPair, ...]
    lam: float

    @property
    def betas(self) -> np.ndarray:
        return np.array([p.beta for p in self.pairs])

    @property
    def vectors(self) -> np.ndarray:
        """Columns are e_k, normalized by eᵀ Gm e = 1."""
        return np.column_stack([p.coeffs for p in self.pairs])

    @property
    def negative_subspace(self) -> np.ndarray:
        """Indices (0-based) with β < 1."""
        return np.nonzero(self.betas < 1.0)[0]

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.betas)

    @property
    def clusters(self) -> list[list[int]]:
        return cluster_indices(self.betas)

    def __len__(self):
        return len(self.pairs)


def cluster_indices(betas, rtol: float = CLUSTER_RTOL) -> list[list[int]]:
    groups: list[list[int]] = []
    for i, b in enumerate(betas):
        if groups and abs(b - betas[groups[-1][-1]]) <= rtol * abs(b):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def solve_pencil(forms, count: int) -> SpectralDecomposition:
    """The ``count`` smallest finite β of A e = β Gm e."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if forms.negative_part_vanishes:
        raise UndefinedForm("Gm = 0: no finite generalized eigenvalues")
    L = forms.cholesky
    n = L.shape[0]
    X = solve_triangular(L, forms.Gm, lower=True)
    C = solve_triangular(L, X.T, lower=True)
    C = 0.5 * (C + C.T)
    theta, Y = eigh(C)
    order = np.argsort(theta)[::-1]
    theta, Y = theta[order], Y[:, order]
    finite = theta > _THETA_RTOL * max(theta[0], 0.0) * max(n, 1)
    if theta[0] <= 0 or finite.sum() < count:
        raise InsufficientRange(
            f"only {int(finite.sum())} finite eigenvalues, {count} requested"
        )
    E = solve_triangular(L.T, Y[:, :count], lower=False) / np.sqrt(theta[:count])
    pairs = []
    for j in range(count):
        e = E[:, j]
        i = np.argmax(np.abs(e))
        if e[i] < 0:
            e = -e
        beta = 1.0 / theta[j]
        Ae = forms.A @ e
        res = np.linalg.norm(Ae - beta * (forms.Gm @ e)) / np.linalg.norm(Ae)
        pairs.append(EigenPair(beta=float(beta), coeffs=e, residual=float(res)))
    return SpectralDecomposition(tuple(pairs), forms.lam)


def cross_gram(basis: SpectralBasis, box: Box, m_box: int) -> np.ndarray:
    """X[k, l] = ∫_box φ_k ψ_l with ψ the sine basis of ``box`` (m_box per axis)."""
    D = basis.domain
    out = np.ones((1, 1))
    for i in range(basis.dim):
        w = sine_overlap_1d(
            basis.modes_per_dim, D.lo[i], D.lengths[i],
            m_box, box.lo[i], box.lengths[i], box.lo[i], box.hi[i],
        )
        out = np.kron(out, w)
    return out


def _box_mode_table(box: Box, m: int) -> np.ndarray:
    grids = np.meshgrid(*([np.arange(1, m + 1)] * box.dim), indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=-1)
    return np.sum((idx * np.pi / box.lengths) ** 2, axis=1)


def outside_mass(forms, u: np.ndarray) -> float:
    """∫_{D∖Ω} u² / ∫_D u²."""
    total = float(u @ u)
    if total == 0:
        return 0.0
    return float(min(max(1.0 - (u @ forms.well_gram @ u) / total, 0.0), 1.0))


def eigenspace_angle(forms, e: np.ndarray, level_value: float, m_box: int) -> float:
    """L²(Ω) angle between e|_Ω and the Dirichlet eigenspace of Ω at ``level_value``."""
    well = _well_box(forms)
    mu = _box_mode_table(well, m_box)
    sel = np.nonzero(np.abs(mu - level_value) <= 1e-9 * level_value)[0]
    X = cross_gram(forms.basis, well, m_box)[:, sel]
    inside = float(e @ forms.well_gram @ e)
    if inside <= 0:
        return float(np.pi / 2)
    proj = X.T @ e
    c = min(np.sqrt(float(proj @ proj) / inside), 1.0)
    return float(np.arccos(c))


def _well_box(forms) -> Box:
    return forms.basis.well if forms.basis.well is not None else forms.basis.domain


@dataclass
class ConvergenceTable:
    rows: list[dict] = field(default_factory=list)

    COLUMNS = ("lambda", "k", "beta_k", "beta_k_0", "rel_err", "outside_mass", "residual")

    def column(self, name: str, k: int | None = None) -> np.ndarray:
        return np.array([r[name] for r in self.rows if k is None or r["k"] == k])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(self.COLUMNS)
            for r in self.rows:
                wr.writerow([_fmt(r[c]) for c in self.COLUMNS])


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def eigen_convergence_sweep(params: ProblemParams, lambda_grid, count: int = 3) -> ConvergenceTable:
    """β_k(λ) against the closed-form limit levels along a λ grid."""
    grid = np.asarray(lambda_grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("lambda grid must be increasing")
    if not params.indefinite:
        raise UndefinedForm("min(a0, b0) >= 0: the pencil has no finite eigenvalues")
    setup = spectral_setup(params.well.well_box, params.a0, params.b0, max(count, 8))
    limit = beta0_formula(setup.mu[:count], params.a0, params.b0)
    basis = basis_for(params)
    m_box = max(int(np.ceil(np.sqrt(setup.mu[count - 1]) * params.well.well_box.lengths.max() / np.pi)) + 1, 2)
    table = ConvergenceTable()
    for lam in grid:
        forms = assemble_forms(basis, params.with_lambda(lam))
        dec = solve_pencil(forms, count)
        for k, pair in enumerate(dec.pairs, start=1):
            table.rows.append(
                {
                    "lambda": float(lam),
                    "k": k,
                    "beta_k": pair.beta,
                    "beta_k_0": float(limit[k - 1]),
                    "rel_err": abs(pair.beta - limit[k - 1]) / abs(limit[k - 1]),
                    "outside_mass": outside_mass(forms, pair.coeffs),
                    "residual": pair.residual,
                    "angle": eigenspace_angle(forms, pair.coeffs, setup.mu[k - 1], m_box),
                }
            )
    return table


@dataclass(frozen=True)
class MultiplicityReport:
    cluster_dims: tuple[int, ...]
    analytic_dims: tuple[int, ...]
    within_bound: tuple[bool, ...]
    first_simple: bool

    @property
    def consistent(self) -> bool:
        return all(self.within_bound)


def simplicity_check(decomposition: SpectralDecomposition, setup) -> MultiplicityReport:
    """Numerical multiplicities vs the analytic level dimensions, level by level."""
    clusters = cluster_indices(decomposition.betas)
    dims = tuple(len(c) for c in clusters)
    analytic = tuple(int(setup.multiplicities[j]) if j < len(setup.multiplicities) else 0
                     for j in range(len(dims)))
    # the last cluster may be cut by ``count``; it still obeys the bound
    within = tuple(d <= a for d, a in zip(dims, analytic))
    return MultiplicityReport(dims, analytic, within, dims[0] == 1)


def detect_simplicity_lambda(params: ProblemParams, lambda_grid, count: int = 3) -> float | None:
    """First grid λ from which β₁ stays a simple cluster; None if never."""
    setup = spectral_setup(params.well.well_box, params.a0, params.b0, max(count, 8))
    basis = basis_for(params)
    found = None
    for lam in np.asarray(lambda_grid, dtype=float):
        dec = solve_pencil(assemble_forms(basis, params.with_lambda(lam)), count)
        if simplicity_check(dec, setup).first_simple:
            found = float(lam) if found is None else found
        else:
            found = None
    return found


@dataclass(frozen=True)
class FormBoundReport:
    upper_bound: float  # 1 - 1/β_{k0*-1}
    lower_bound: float  # 1 - 1/β_{k0*}
    worst_upper_margin: float  # min over samples of bound - ratio (negative subspace)
    worst_lower_margin: float  # min over samples of ratio - bound (complement)
    identity_errors: np.ndarray  # |𝒟(e_k,e_k) - (β_k - 1)|
    samples: int

    def holds(self, tol: float = 1e-8) -> bool:
        return (
            self.worst_upper_margin >= -tol
            and self.worst_lower_margin >= -tol
            and bool(np.all(self.identity_errors <= tol))
        )


def form_bounds_check(forms, decomposition: SpectralDecomposition, k0_star: int,
                      samples: int = 1000, seed: int = 0) -> FormBoundReport:
    """Rayleigh-quotient bounds of 𝒟_λ/‖·‖²_λ on the negative subspace and its complement."""
    betas = decomposition.betas
    k = int(k0_star)
    if k < 2 or len(betas) < k or not betas[k - 2] < 1.0 < betas[k - 1]:
        raise PrerequisiteFailed(
            f"need beta_(k0*-1) < 1 < beta_k0* with k0*={k}; got {betas[: max(k, 1)]}"
        )
    rng = np.random.default_rng(seed)
    E = decomposition.vectors[:, : k - 1]
    A, D = forms.A, forms.D
    upper = 1.0 - 1.0 / betas[k - 2]
    lower = 1.0 - 1.0 / betas[k - 1]

    Z = E @ rng.standard_normal((k - 1, samples))
    r_neg = np.einsum("is,is->s", Z, D @ Z) / np.einsum("is,is->s", Z, A @ Z)

    W = solve_triangular(forms.cholesky.T, rng.standard_normal((A.shape[0], samples)), lower=False)
    W = W - E @ ((E.T @ (A @ W)) / betas[: k - 1, None])
    r_cmp = np.einsum("is,is->s", W, D @ W) / np.einsum("is,is->s", W, A @ W)

    V = decomposition.vectors
    ident = np.abs(np.einsum("ik,ik->k", V, D @ V) - (betas - 1.0))
    return FormBoundReport(
        upper_bound=float(upper),
        lower_bound=float(lower),
        worst_upper_margin=float(np.min(upper - r_neg)),
        worst_lower_margin=float(np.min(r_cmp - lower)),
        identity_errors=ident,
        samples=samples,
    )
