"""Tensor sine basis on the truncation box and assembly of the quadratic forms.

Basis functions are L²(D)-orthonormal products

    φ_k(x) = Π_i sqrt(2/L_i) sin(k_i π (x_i - lo_i) / L_i),   k_i = 1..m,

so u = Δu = 0 on ∂D and the bilaplacian, Dirichlet stiffness and mass are
diagonal: K = diag(ν²), G = diag(ν), M = I with ν_k = π² Σ (k_i/L_i)².
Modes are ordered lexicographically (last axis fastest), matching
``np.kron`` and C-order reshapes of the coefficient tensor.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import OutOfDomain, QuadratureOverflow, ResourceLimit
from .model_config import Box, ProblemParams, check_lambda, eval_potential

MODE_CAP = 4096
GAUSS_POINTS_PER_PANEL = 10


def sine_overlap_1d(m1, lo1, L1, m2, lo2, L2, a, b) -> np.ndarray:
    """∫_a^b ψ_k(x) χ_l(x) dx for normalized sine families on two intervals.

    ψ_k = sqrt(2/L1) sin(kπ(x-lo1)/L1), χ_l likewise; returns an (m1, m2) array.
    Uses sin·sin = (cos(Δ) - cos(Σ))/2 and the sinc form of ∫cos, which is
    stable as the frequency difference goes to zero.
    """
    k = np.arange(1, m1 + 1)[:, None]
    l = np.arange(1, m2 + 1)[None, :]
    al, ph1 = k * np.pi / L1, -k * np.pi * lo1 / L1
    ga, ph2 = l * np.pi / L2, -l * np.pi * lo2 / L2
    mid, half = 0.5 * (a + b), 0.5 * (b - a)

    def icos(om, c):
        # ∫_a^b cos(om x + c) dx
        return (b - a) * np.cos(om * mid + c) * np.sinc(om * half / np.pi)

    val = 0.5 * (icos(al - ga, ph1 - ph2) - icos(al + ga, ph1 + ph2))
    return np.sqrt(2.0 / L1) * np.sqrt(2.0 / L2) * val


def sine_values_1d(m: int, lo: float, L: float, x) -> np.ndarray:
    """(len(x), m) matrix of normalized sine modes at points x."""
    x = np.asarray(x, dtype=float)[:, None]
    k = np.arange(1, m + 1)[None, :]
    return np.sqrt(2.0 / L) * np.sin(k * np.pi * (x - lo) / L)


def sine_laplacian_weights(m: int, L: float) -> np.ndarray:
    return (np.arange(1, m + 1) * np.pi / L) ** 2


def gauss_legendre_panels(breaks, panels: int, points: int = GAUSS_POINTS_PER_PANEL):
    """Composite Gauss–Legendre rule over consecutive segments of ``breaks``.

    ``panels`` panels are shared among the segments in proportion to length
    (each segment gets at least one), so panel edges align with every break.
    """
    breaks = np.asarray(breaks, dtype=float)
    seg = np.diff(breaks)
    seg_panels = np.maximum(1, np.round(panels * seg / seg.sum()).astype(int))
    g, w = np.polynomial.legendre.leggauss(points)
    xs, ws = [], []
    for a, b, n in zip(breaks[:-1], breaks[1:], seg_panels):
        edges = np.linspace(a, b, n + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            h = 0.5 * (hi - lo)
            xs.append(lo + h * (g + 1.0))
            ws.append(h * w)
    return np.concatenate(xs), np.concatenate(ws)


def apply_axes(mats, tensor: np.ndarray) -> np.ndarray:
    """Apply ``mats[i]`` along axis i of ``tensor`` (separable operator)."""
    out = tensor
    for ax, mat in enumerate(mats):
        out = np.moveaxis(np.tensordot(mat, out, axes=([1], [ax])), 0, ax)
    return out


@dataclass(frozen=True)
class Quadrature:
    """Tensor Gauss–Legendre grid with panel edges on ∂Ω and ∂D."""

    nodes: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]
    values: tuple[np.ndarray, ...]  # per-axis (nq_i, m) sine tables

    @cached_property
    def weight_tensor(self) -> np.ndarray:
        out = self.weights[0]
        for w in self.weights[1:]:
            out = np.multiply.outer(out, w)
        return out

    def points(self) -> np.ndarray:
        grids = np.meshgrid(*self.nodes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(x) for x in self.nodes)


@dataclass(frozen=True)
class SpectralBasis:
    domain: Box
    modes_per_dim: int
    well: Box | None = None
    quadrature_panels: int = 32
    quadrature_points: int = GAUSS_POINTS_PER_PANEL
    mode_cap: int = MODE_CAP

    def __post_init__(self):
        if self.modes_per_dim < 2:
            raise ValueError("modes_per_dim must be >= 2")
        if self.modes_per_dim**self.domain.dim > self.mode_cap:
            raise ResourceLimit(
                f"{self.modes_per_dim}^{self.domain.dim} modes exceed the cap {self.mode_cap}"
            )

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def size(self) -> int:
        return self.modes_per_dim**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.modes_per_dim,) * self.dim

    @cached_property
    def indices(self) -> np.ndarray:
        """(size, N) multi-indices in lexicographic order."""
        m = self.modes_per_dim
        grids = np.meshgrid(*([np.arange(1, m + 1)] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    @cached_property
    def nu(self) -> np.ndarray:
        """Per-mode eigenvalue of -Δ on D."""
        L = self.domain.lengths
        return np.sum((self.indices * np.pi / L) ** 2, axis=1)

    @property
    def reporting_order(self) -> np.ndarray:
        return np.argsort(self.nu, kind="stable")

    def axis_overlap(self, box: Box) -> list[np.ndarray]:
        m, lo, L = self.modes_per_dim, self.domain.lo, self.domain.lengths
        return [
            sine_overlap_1d(m, lo[i], L[i], m, lo[i], L[i], box.lo[i], box.hi[i])
            for i in range(self.dim)
        ]

    def region_gram(self, box: Box) -> np.ndarray:
        """Matrix of ∫_{box ∩ D} φ_k φ_l (closed form)."""
        if box == self.domain:
            return np.eye(self.size)
        out = np.ones((1, 1))
        for w in self.axis_overlap(box):
            out = np.kron(out, w)
        return out

    @cached_property
    def quadrature(self) -> Quadrature:
        nodes, weights, values = [], [], []
        for i in range(self.dim):
            lo, hi = self.domain.lo[i], self.domain.hi[i]
            br = [lo, hi]
            if self.well is not None:
                br = sorted({lo, hi, self.well.lo[i], self.well.hi[i]})
            x, w = gauss_legendre_panels(br, self.quadrature_panels, self.quadrature_points)
            nodes.append(x)
            weights.append(w)
            values.append(sine_values_1d(self.modes_per_dim, lo, hi - lo, x))
        return Quadrature(tuple(nodes), tuple(weights), tuple(values))

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Field values on the quadrature grid (tensor of shape quadrature.shape)."""
        c = np.asarray(coeffs, dtype=float).reshape(self.shape)
        return apply_axes(self.quadrature.values, c)

    def project(self, grid_values: np.ndarray) -> np.ndarray:
        """Coefficient vector of ∫ g φ_k for grid values g (quadrature)."""
        q = self.quadrature
        vals = np.asarray(grid_values) * q.weight_tensor
        return apply_axes([v.T for v in q.values], vals).ravel()

    def weighted_gram(self, grid_weights: np.ndarray) -> np.ndarray:
        """Matrix of Σ_q w(q) φ_k(q) φ_l(q) for a nodal weight tensor."""
        q = self.quadrature
        t = np.asarray(grid_weights) * q.weight_tensor
        m = self.modes_per_dim
        for vals in q.values:
            pair = np.einsum("qk,ql->qkl", vals, vals)
            # contract the leading quadrature axis, append (k, l)
            t = np.tensordot(t, pair, axes=([0], [0]))
        # axes now (k1, l1, k2, l2, ...)
        N = self.dim
        t = t.reshape((m, m) * N)
        perm = [2 * i for i in range(N)] + [2 * i + 1 for i in range(N)]
        return t.transpose(perm).reshape(self.size, self.size)


def build_basis(domain: Box, modes_per_dim: int, well: Box | None = None,
                quadrature_panels: int = 32, mode_cap: int = MODE_CAP) -> SpectralBasis:
    return SpectralBasis(domain, modes_per_dim, well, quadrature_panels, mode_cap=mode_cap)


def basis_for(params: ProblemParams) -> SpectralBasis:
    w = params.well
    return build_basis(w.truncation_box, params.modes_per_dim, w.well_box, params.quadrature_panels)


@dataclass(frozen=True)
class QuadraticForms:
    """Matrices of ⟨·,·⟩_λ (A), 𝒢_λ (Gm) and their building blocks.

    ``K`` and ``G`` are stored by their diagonals; M = I.
    """

    basis: SpectralBasis
    A: np.ndarray
    Gm: np.ndarray
    k_diag: np.ndarray
    g_diag: np.ndarray
    P_plus: np.ndarray
    P_minus: np.ndarray
    well_gram: np.ndarray  # ∫_Ω φ_k φ_l
    lam: float
    a0: float
    b0: float
    b_outside: np.ndarray = field(repr=False, default=None)  # matrix of ∫ b φ_k φ_l

    @property
    def K(self) -> np.ndarray:
        return np.diag(self.k_diag)

    @property
    def G(self) -> np.ndarray:
        return np.diag(self.g_diag)

    @property
    def M(self) -> np.ndarray:
        return np.eye(len(self.k_diag))

    @cached_property
    def D(self) -> np.ndarray:
        """Matrix of 𝒟_λ = ⟨·,·⟩_λ - 𝒢_λ."""
        return self.A - self.Gm

    @cached_property
    def cholesky(self) -> np.ndarray:
        from .errors import FactorizationFailure

        try:
            return np.linalg.cholesky(self.A)
        except np.linalg.LinAlgError as exc:
            raise FactorizationFailure("form matrix A is not positive definite") from exc

    def solve_A(self, rhs: np.ndarray) -> np.ndarray:
        from scipy.linalg import cho_solve

        return cho_solve((self.cholesky, True), rhs)

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(u @ self.A @ u, 0.0)))

    def norm_inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ self.A @ v)

    @property
    def negative_part_vanishes(self) -> bool:
        return not np.any(self.Gm)


def assemble_forms(basis: SpectralBasis, params: ProblemParams) -> QuadraticForms:
    """Assemble A = K + a0⁺ G + P₊ and Gm = a0⁻ G + P₋ for the given parameters."""
    check_lambda(params)
    well = params.well
    lam, a0, b0 = params.lam, params.a0, params.b0
    nu = basis.nu
    k_diag, g_diag = nu**2, nu.copy()
    n = basis.size
    inside = basis.region_gram(well.well_box)
    if well.ramp_width > 0:
        b_vals = eval_potential(well, basis.quadrature.points()).reshape(basis.quadrature.shape)
        V = lam * b_vals + b0
        P_plus = basis.weighted_gram(np.maximum(V, 0.0))
        P_minus = basis.weighted_gram(np.maximum(-V, 0.0))
        b_mat = basis.weighted_gram(b_vals)
    else:
        outside = np.eye(n) - inside
        v_in, v_out = b0, lam * well.outside_value + b0
        P_plus = max(v_in, 0.0) * inside + max(v_out, 0.0) * outside
        P_minus = max(-v_in, 0.0) * inside + max(-v_out, 0.0) * outside
        b_mat = well.outside_value * outside
    A = np.diag(k_diag + max(a0, 0.0) * g_diag) + P_plus
    Gm = np.diag(max(-a0, 0.0) * g_diag) + P_minus
    A = 0.5 * (A + A.T)
    Gm = 0.5 * (Gm + Gm.T)
    return QuadraticForms(
        basis=basis, A=A, Gm=Gm, k_diag=k_diag, g_diag=g_diag,
        P_plus=P_plus, P_minus=P_minus, well_gram=inside,
        lam=lam, a0=a0, b0=b0, b_outside=b_mat,
    )


def forms_for(params: ProblemParams) -> QuadraticForms:
    return assemble_forms(basis_for(params), params)


def evaluate_field(basis: SpectralBasis, coeffs, points) -> np.ndarray:
    """Σ_k c_k φ_k(x) at arbitrary points (shape (n, N) or (n,) in 1-D)."""
    c = np.asarray(coeffs, dtype=float)
    if c.size != basis.size:
        raise ValueError(f"expected {basis.size} coefficients, got {c.size}")
    pts = np.asarray(points, dtype=float).reshape(-1, basis.dim)
    if not np.all(basis.domain.contains(pts)):
        raise OutOfDomain("evaluation point outside the truncation box")
    m, lo, L = basis.modes_per_dim, basis.domain.lo, basis.domain.lengths
    t = c.reshape(basis.shape)
    # first axis picks up the point index, later axes contract along it
    s0 = sine_values_1d(m, lo[0], L[0], pts[:, 0])
    t = np.tensordot(s0, t, axes=([1], [0]))
    for i in range(1, basis.dim):
        s = sine_values_1d(m, lo[i], L[i], pts[:, i])
        t = np.einsum("pk,pk...->p...", s, t)
    return t


def check_finite(values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise QuadratureOverflow("field synthesis produced non-finite values")
    return values


def dump_forms(forms: QuadraticForms, out_dir: str | Path) -> list[Path]:
    """Write every form matrix as CSV (row, col, value), nonzeros only."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mats = {
        "A": forms.A, "Gm": forms.Gm, "D": forms.D, "K": forms.K, "G": forms.G,
        "P_plus": forms.P_plus, "P_minus": forms.P_minus,
    }
    paths = []
    for name, mat in mats.items():
        path = out_dir / f"forms_{name}.csv"
        rows, cols = np.nonzero(mat)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["row", "col", "value"])
            for r, c in zip(rows, cols):
                wr.writerow([int(r), int(c), repr(float(mat[r, c]))])
        paths.append(path)
    return paths
