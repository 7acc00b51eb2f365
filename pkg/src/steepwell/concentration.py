"""λ-sweeps: solutions concentrating in the well bottom as the well deepens."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .discretization import assemble_forms, basis_for
from .errors import SteepWellError
from .limit_problem import LimitSolution, _decomposition, solve_limit
from .model_config import ProblemParams, check_lambda
from .spectral import cross_gram, outside_mass
from .variational import (
    TOL_DEFINITE,
    TOL_LINKING,
    find_linking_geometry,
    linking_solve,
    solve,
)

log = logging.getLogger(__name__)

COLUMNS = ("lambda", "energy", "norm_lambda", "outside_mass", "well_penalty",
           "l2_distance", "h2_distance", "status")


@dataclass
class SweepRow:
    lam: float
    energy: float = float("nan")
    norm_lambda: float = float("nan")
    outside_mass: float = float("nan")
    well_penalty: float = float("nan")
    l2_distance: float = float("nan")
    h2_distance: float = float("nan")
    status: str = "ok"
    coeffs: np.ndarray | None = field(default=None, repr=False)

    def as_csv(self) -> list[str]:
        nums = [self.lam, self.energy, self.norm_lambda, self.outside_mass,
                self.well_penalty, self.l2_distance, self.h2_distance]
        return [repr(float(v)) for v in nums] + [self.status]


@dataclass
class SweepReport:
    rows: list[SweepRow]
    limit_solutions: list[LimitSolution]

    def column(self, name: str, ok_only: bool = True) -> np.ndarray:
        key = "lam" if name == "lambda" else name
        return np.array([getattr(r, key) for r in self.rows if r.status == "ok" or not ok_only])

    @property
    def energy_interval(self) -> tuple[float, float]:
        e = self.column("energy")
        return float(e.min()), float(e.max())

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(COLUMNS)
            for r in self.rows:
                wr.writerow(r.as_csv())


def distances(forms, u, limit: LimitSolution) -> tuple[float, float]:
    """(L² distance, H² surrogate) between u on D and u_* zero-extended from Ω.

    The surrogate adds ‖Δu − Δu_*‖ with Δu_* the Ω-Laplacian extended by
    zero; both Laplacians are diagonal in their sine bases.
    """
    basis = forms.basis
    m_box = limit.basis.modes_per_dim
    X = cross_gram(basis, limit.basis.domain, m_box)
    us = limit.coeffs
    lu, lus = basis.nu * u, limit.laplacian_coeffs
    l2sq = u @ u + us @ us - 2.0 * u @ X @ us
    lapsq = lu @ lu + lus @ lus - 2.0 * lu @ X @ lus
    return float(np.sqrt(max(l2sq, 0.0))), float(np.sqrt(max(l2sq + lapsq, 0.0)))


def nearest_distances(forms, u, limits) -> tuple[float, float]:
    best = (np.inf, np.inf)
    for lim in limits:
        for sign in (1.0, -1.0):
            d = distances(forms, sign * u, lim)
            if d[1] < best[1]:
                best = d
    return best


def sweep(params_base: ProblemParams, lambda_grid, warm_start: bool = True, *,
          limit_solutions: list[LimitSolution] | None = None, limit_starts: int = 3,
          tol: float | None = None, seed: int = 0) -> SweepReport:
    """Solve at each λ and collect concentration diagnostics.

    Failures are recorded in the row status; the sweep continues.
    """
    grid = np.asarray(lambda_grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("lambda grid must be increasing")
    if limit_solutions is None:
        limit_solutions = solve_limit(params_base, starts=limit_starts, seed=seed)
    basis = basis_for(params_base)
    spec = params_base.nonlinearity
    rows: list[SweepRow] = []
    prev = None
    for lam in grid:
        row = SweepRow(lam=float(lam))
        rows.append(row)
        p = params_base.with_lambda(lam)
        try:
            check_lambda(p)
            forms = assemble_forms(basis, p)
            dec = _decomposition(forms)
            if warm_start and prev is not None:
                geom = find_linking_geometry(forms, spec, dec, seed=seed)
                t = tol or (TOL_LINKING if geom.negative_dim else TOL_DEFINITE)
                cp = linking_solve(forms, spec, dec, geom, t, start=prev)
            else:
                cp = solve(forms, spec, dec, tol=tol, seed=seed)
        except SteepWellError as exc:
            row.status = f"failed: {type(exc).__name__}"
            log.warning("lambda=%g failed: %s", lam, exc)
            continue
        u = cp.coeffs
        prev = u
        row.coeffs = u
        row.energy = cp.energy
        row.norm_lambda = forms.norm(u)
        row.outside_mass = outside_mass(forms, u)
        row.well_penalty = float(lam * (u @ forms.b_outside @ u))
        row.l2_distance, row.h2_distance = nearest_distances(forms, u, limit_solutions)
    return SweepReport(rows, limit_solutions)
