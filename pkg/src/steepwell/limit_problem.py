"""Well-bottom problem Δ²u − a0Δu + b0u = f(u) on Ω with u = Δu = 0 on ∂Ω.

Posed directly in the sine basis of Ω, where the quadratic part is diagonal
with eigenvalues μ² + a0 μ + b0. The same minimax solvers apply; the sign
split of a0 and b0 is done by the ordinary form assembly with D = Ω.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import dirichlet_mu, limit_spectrum
from .discretization import SpectralBasis, assemble_forms, basis_for
from .errors import DegenerateToZero, SolverError
from .model_config import ProblemParams
from .spectral import solve_pencil
from .variational import (
    TOL_DEFINITE,
    TOL_LINKING,
    CriticalPoint,
    Energy,
    find_linking_geometry,
    linking_solve,
    mountain_pass_solve,
)


@dataclass(frozen=True)
class LimitSolution:
    coeffs: np.ndarray  # in the sine basis of Ω
    energy: float
    grad_norm: float
    basis: SpectralBasis
    critical_point: CriticalPoint

    @property
    def laplacian_coeffs(self) -> np.ndarray:
        """Coefficients of -Δu_* (sine modes are eigenfunctions)."""
        return self.basis.nu * self.coeffs


def limit_forms(params: ProblemParams):
    lp = params.limit_params()
    return assemble_forms(basis_for(lp), lp)


def _decomposition(forms, count: int = 8):
    if forms.negative_part_vanishes:
        return None
    n = forms.A.shape[0]
    count = min(count, n)
    dec = solve_pencil(forms, count)
    while dec.betas[-1] < 1.0 and count < n:
        count = min(2 * count, n)
        dec = solve_pencil(forms, count)
    return dec


def solve_limit(params: ProblemParams, tol: float | None = None, *, starts: int = 1,
                seed: int = 0) -> list[LimitSolution]:
    """Nontrivial critical points of the Ω-functional.

    The first entry comes from the minimax geometry; ``starts > 1`` adds
    solutions seeded from higher pencil directions (duplicates and mirror
    images are dropped).
    """
    forms = limit_forms(params)
    spec = params.nonlinearity
    if spec.scale == 0:
        spectrum = limit_spectrum(params.a0, params.b0, dirichlet_mu(params.well.well_box, 8))
        if np.all(np.abs(spectrum) > 0):
            raise DegenerateToZero("f = 0 and 0 is off the spectrum: only the trivial solution")
    dec = _decomposition(forms)
    geom = find_linking_geometry(forms, spec, dec, seed=seed)
    if geom.negative_dim:
        tol = tol or TOL_LINKING
        first = linking_solve(forms, spec, dec, geom, tol)
    else:
        tol = tol or TOL_DEFINITE
        first = mountain_pass_solve(forms, spec, geom, tol)
    found = [first]
    if starts > 1 and dec is not None:
        V = dec.vectors
        k = geom.negative_dim
        for j in range(k + 1, min(V.shape[1], k + starts)):
            try:
                cp = linking_solve(forms, spec, dec, geom, tol, start=geom.R * 0.5 * V[:, j] / forms.norm(V[:, j]))
            except SolverError:
                continue
            if all(_distinct(forms, cp.coeffs, other.coeffs) for other in found):
                found.append(cp)
    return [LimitSolution(cp.coeffs, cp.energy, cp.grad_norm, forms.basis, cp) for cp in found]


def _distinct(forms, u, v, rtol: float = 1e-6) -> bool:
    scale = max(forms.norm(u), forms.norm(v))
    return min(forms.norm(u - v), forms.norm(u + v)) > rtol * scale


def limit_energy(params: ProblemParams, coeffs) -> float:
    """ℱ(u) = ½∫(|Δu|² + a0|∇u|² + b0u²) − ∫F(u) for Ω-basis coefficients."""
    forms = limit_forms(params)
    return Energy(forms, params.nonlinearity).value(np.asarray(coeffs, dtype=float))
