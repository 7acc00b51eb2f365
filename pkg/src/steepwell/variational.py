"""Energy functional and minimax solvers for nontrivial critical points.

E(u) = ½ 𝒟_λ(u, u) − ∫ F(u), with the nonlinear integral taken by the
tensor Gauss–Legendre rule of the basis. Gradients are Riesz
representatives in ⟨·,·⟩_λ: A g = 𝒟u − ∫ f(u) φ.

Two solvers share that machinery:

* ``mountain_pass_solve`` — path of nodes from 0 to an endpoint with
  E <= 0; the path maximizer is pushed downhill until it stalls at a saddle.
* ``linking_solve`` — minimax on a reduced functional: for a direction w in
  the A-orthogonal complement of the negative subspace Y, maximize E over
  Y ⊕ span{w} (small dense problem), then descend in w.

Both finish with Newton iterations on E′(u) = 0 once the minimax stage is
close, which turns the linear rate of the descent into a quadratic one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateToZero,
    GeometryNotFound,
    InnerMaxDiverged,
    NoConvergence,
    QuadratureOverflow,
)
from .model_config import NonlinearitySpec

log = logging.getLogger(__name__)

PATH_NODES = 41
ARMIJO = 1e-4
MAX_ITER = 50_000
TOL_DEFINITE = 1e-8
TOL_LINKING = 1e-6
BOUNDARY_SAMPLES = 1000
SPHERE_SAMPLES = 200


def _finite(values):
    if not np.all(np.isfinite(values)):
        raise QuadratureOverflow("non-finite values in the nonlinear term")
    return values


class Energy:
    """E_λ on a fixed set of forms and a nonlinearity."""

    def __init__(self, forms, spec: NonlinearitySpec):
        self.forms = forms
        self.spec = spec
        self.basis = forms.basis
        self.D = forms.D
        self._w = self.basis.quadrature.weight_tensor

    def field(self, u):
        return _finite(self.basis.synthesize(u))

    def _F(self, vals):
        with np.errstate(over="ignore", invalid="ignore"):
            return _finite(self.spec.F(vals))

    def _f(self, vals):
        with np.errstate(over="ignore", invalid="ignore"):
            return _finite(self.spec.f(vals))

    def value(self, u) -> float:
        nl = np.sum(self._w * self._F(self.field(u)))
        return float(0.5 * u @ self.D @ u - nl)

    def coefficient_gradient(self, u) -> np.ndarray:
        """E′(u) tested against each basis function."""
        vals = self.field(u)
        return self.D @ u - self.basis.project(self._f(vals))

    def value_and_gradient(self, u):
        vals = self.field(u)
        nl = np.sum(self._w * self._F(vals))
        e = float(0.5 * u @ self.D @ u - nl)
        r = self.D @ u - self.basis.project(self._f(vals))
        return e, r

    def hessian(self, u) -> np.ndarray:
        vals = self.field(u)
        with np.errstate(over="ignore", invalid="ignore"):
            w = _finite(self.spec.df(vals))
        return self.D - self.basis.weighted_gram(w)

    def riesz(self, r) -> np.ndarray:
        return self.forms.solve_A(r)

    def norm(self, u) -> float:
        return self.forms.norm(u)

    def nonlinear_integrals(self, u) -> dict:
        vals = self.field(u)
        w = self._w
        f, F = self.spec.f(vals), self.spec.F(vals)
        out = {"int_fu_minus_2F": float(np.sum(w * (f * vals - 2 * F)))}
        if self.spec.kind == "power":
            out["lp_norm_p"] = float(np.sum(w * np.abs(vals) ** self.spec.p))
        return out


@dataclass(frozen=True)
class EnergyState:
    coeffs: np.ndarray
    energy: float
    grad: np.ndarray
    grad_norm: float


def energy_and_gradient(forms, spec: NonlinearitySpec, u) -> EnergyState:
    fn = Energy(forms, spec)
    u = np.asarray(u, dtype=float)
    e, r = fn.value_and_gradient(u)
    g = fn.riesz(r)
    return EnergyState(u, e, g, float(np.sqrt(max(g @ r, 0.0))))


def euler_lagrange_residual(forms, spec: NonlinearitySpec, u) -> float:
    """max_k |⟨u,φ_k⟩_λ − 𝒢_λ(u,φ_k) − ∫f(u)φ_k| / (‖φ_k‖_λ ‖u‖_λ).

    Computed from the assembled forms and a fresh quadrature of f(u); no
    solve with A is involved.
    """
    u = np.asarray(u, dtype=float)
    vals = forms.basis.synthesize(u)
    r = forms.A @ u - forms.Gm @ u - forms.basis.project(spec.f(vals))
    scale = np.sqrt(np.diag(forms.A)) * max(forms.norm(u), np.finfo(float).tiny)
    return float(np.max(np.abs(r) / scale))


@dataclass(frozen=True)
class LinkingGeometry:
    rho: float
    kappa: float
    R: float
    endpoint: np.ndarray  # unit ‖·‖_λ vector e_{k0*}(λ) or the lowest mode
    negative_basis: np.ndarray  # columns: negative subspace, unit ‖·‖_λ
    boundary_sup: float
    regime: str  # "mountain-pass" or "linking"
    samples: int

    @property
    def negative_dim(self) -> int:
        return self.negative_basis.shape[1]


@dataclass
class CriticalPoint:
    coeffs: np.ndarray
    energy: float
    grad_norm: float
    iterations: int
    cerami_trace: np.ndarray  # rows: (energy, ‖u‖_λ, (1+‖u‖_λ)‖∇E‖_λ)
    method: str
    newton_steps: int = 0
    geometry: LinkingGeometry | None = None
    info: dict = field(default_factory=dict)

    @property
    def norm_bound(self) -> float:
        """C₀: largest ‖u_n‖_λ seen along the trace."""
        return float(np.max(self.cerami_trace[:, 1])) if len(self.cerami_trace) else 0.0


def _unit(forms, v):
    n = forms.norm(v)
    return v / n if n > 0 else v


def _lowest_direction(forms) -> np.ndarray:
    """Lowest eigenvector of 𝒟_λ relative to L² (the φ₁-like direction)."""
    from scipy.linalg import eigh

    _, V = eigh(forms.D, subset_by_index=[0, 0])
    v = V[:, 0]
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return _unit(forms, v)


def _split_decomposition(forms, decomposition):
    """(negative basis with unit λ-norm, endpoint) from a decomposition or None."""
    n = forms.A.shape[0]
    if decomposition is None or len(decomposition) == 0:
        return np.zeros((n, 0)), _lowest_direction(forms)
    neg = decomposition.negative_subspace
    V = decomposition.vectors
    Y = np.column_stack([_unit(forms, V[:, i]) for i in neg]) if len(neg) else np.zeros((n, 0))
    k = len(neg)
    if k >= V.shape[1]:
        raise GeometryNotFound("decomposition has no level above the negative subspace")
    return Y, _unit(forms, V[:, k])


def _project_out(forms, Y, x):
    if Y.shape[1] == 0:
        return x
    return x - Y @ (Y.T @ (forms.A @ x))


def find_linking_geometry(forms, spec: NonlinearitySpec, decomposition=None, *,
                          seed: int = 0, sphere_samples: int = SPHERE_SAMPLES,
                          boundary_samples: int = BOUNDARY_SAMPLES,
                          R_cap_factor: float = 1e6) -> LinkingGeometry:
    """Sample the linking (or mountain-pass) geometry of E_λ.

    ρ maximizes the sampled infimum of E on the complement sphere; R doubles
    until the sampled supremum on ∂Q is <= 0.
    """
    fn = Energy(forms, spec)
    rng = np.random.default_rng(seed)
    Y, e = _split_decomposition(forms, decomposition)
    n = forms.A.shape[0]

    dirs = [e]
    if decomposition is not None and len(decomposition):
        V = decomposition.vectors
        for j in range(Y.shape[1] + 1, min(V.shape[1], Y.shape[1] + 4)):
            dirs.append(_unit(forms, _project_out(forms, Y, V[:, j])))
    Lt = forms.cholesky.T
    from scipy.linalg import solve_triangular

    raw = solve_triangular(Lt, rng.standard_normal((n, sphere_samples - len(dirs))), lower=False)
    for j in range(raw.shape[1]):
        dirs.append(_unit(forms, _project_out(forms, Y, raw[:, j])))
    dirs = np.column_stack(dirs)

    def kappa_at(rho):
        return min(fn.value(rho * dirs[:, j]) for j in range(dirs.shape[1]))

    def refined(rho):
        vals = [fn.value(rho * dirs[:, j]) for j in range(dirs.shape[1])]
        return _sphere_infimum(fn, Y, rho, dirs[:, int(np.argmin(vals))])

    rhos = np.geomspace(1e-4, 1e4, 33)
    kap = np.array([kappa_at(r) for r in rhos])
    if not np.max(kap) > 0:
        raise GeometryNotFound("no sphere radius with positive sampled infimum")
    # sampled infima overestimate; rank candidates by the refined value
    cand = [i for i in np.argsort(kap)[::-1][:6]]
    cand += [i - 1 for i in cand if i > 0] + [i - 2 for i in cand if i > 1]
    scored = {int(i): refined(rhos[i]) for i in sorted(set(cand))}
    i = max(scored, key=lambda k: (scored[k], -k))
    rho, kappa = float(rhos[i]), float(scored[i])
    if not kappa > 0:
        raise GeometryNotFound("refined sphere infimum is not positive")

    d = Y.shape[1]
    coef = rng.standard_normal((d, boundary_samples)) if d else np.zeros((0, boundary_samples))
    ts = np.abs(rng.standard_normal(boundary_samples))
    ts[0], coef[:, 0] = 1.0, 0.0
    sphere_pts = []
    for j in range(boundary_samples):
        sphere_pts.append(_unit(forms, Y @ coef[:, j] + ts[j] * e))
    flat_pts = []
    if d:
        for j in range(boundary_samples):
            v = Y @ rng.standard_normal(d)
            flat_pts.append(rng.uniform() * _unit(forms, v))

    R = 2.0 * rho
    while True:
        sup = max(fn.value(R * p) for p in sphere_pts)
        if flat_pts:
            sup = max(sup, max(fn.value(R * p) for p in flat_pts))
        if sup <= 0:
            break
        R *= 2.0
        if R > R_cap_factor * rho:
            raise GeometryNotFound(
                f"sup of E on the boundary stays positive up to R={R:g} (sup={sup:g})"
            )
    return LinkingGeometry(
        rho=rho, kappa=kappa, R=float(R), endpoint=e, negative_basis=Y,
        boundary_sup=float(sup), regime="linking" if d else "mountain-pass",
        samples=int(len(sphere_pts) + len(flat_pts)),
    )


def _sphere_infimum(fn: Energy, Y, rho: float, w, steps: int = 200) -> float:
    """Projected descent of w ↦ E(ρw) on the unit sphere of the complement."""
    forms = fn.forms
    e, r = fn.value_and_gradient(rho * w)
    a = 1.0
    for _ in range(steps):
        g = _project_out(forms, Y, fn.riesz(r)) * rho
        g = g - w * forms.norm_inner(w, g)
        gn2 = forms.norm(g) ** 2
        if gn2 <= 1e-24 * max(1.0, e * e):
            break
        a = min(1.0, 2.0 * a)
        while a > 1e-12:
            wc = _unit(forms, w - a * g)
            ec, rc = fn.value_and_gradient(rho * wc)
            if ec <= e - ARMIJO * a * gn2:
                break
            a *= 0.5
        else:
            break
        w, e, r = wc, ec, rc
    return float(e)


def _trace_row(fn, u, e, gn):
    nu = fn.norm(u)
    return (e, nu, (1.0 + nu) * gn)


def newton_polish(fn: Energy, u, tol: float, max_steps: int = 30):
    """Damped Newton on E′(u) = 0 measured in the λ-norm; returns (u, gn, steps, rows)."""
    e, r = fn.value_and_gradient(u)
    gn = float(np.sqrt(max(fn.riesz(r) @ r, 0.0)))
    rows = []
    steps = 0
    while gn > tol and steps < max_steps:
        H = fn.hessian(u)
        try:
            delta = -np.linalg.solve(H, r)
        except np.linalg.LinAlgError:
            break
        s, accepted = 1.0, False
        while s >= 1e-4:
            cand = u + s * delta
            ec, rc = fn.value_and_gradient(cand)
            gc = float(np.sqrt(max(fn.riesz(rc) @ rc, 0.0)))
            if gc < (1.0 - 1e-4 * s) * gn:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
        u, e, r, gn = cand, ec, rc, gc
        steps += 1
        rows.append(_trace_row(fn, u, e, gn))
    return u, e, gn, steps, rows


def mountain_pass_solve(forms, spec: NonlinearitySpec, geometry: LinkingGeometry,
                        tol: float = TOL_DEFINITE, *, path_nodes: int = PATH_NODES,
                        max_iter: int = MAX_ITER, endpoint=None, polish: bool = True,
                        polish_threshold: float = 1e-2) -> CriticalPoint:
    """Path-based minimax descent from 0 to ``endpoint`` (default R·e)."""
    fn = Energy(forms, spec)
    end = geometry.R * geometry.endpoint if endpoint is None else np.asarray(endpoint, float)
    if fn.value(end) > 0:
        raise GeometryNotFound("path endpoint has positive energy")
    path = [s * end for s in _path_parameters(fn, end, path_nodes)]
    energies = np.array([fn.value(z) for z in path])
    rows = []
    step = 1.0
    it = 0
    newton_steps = 0
    while True:
        if energies.max() < geometry.kappa:
            _repair_ridge(path, energies, fn)
        j = int(np.argmax(energies))  # lowest index on ties
        z = path[j]
        e, r = fn.value_and_gradient(z)
        g = fn.riesz(r)
        gn = float(np.sqrt(max(g @ r, 0.0)))
        rows.append(_trace_row(fn, z, e, gn))
        if gn <= tol:
            break
        if polish and gn <= polish_threshold * (1.0 + fn.norm(z)):
            zp, ep, gp, ns, nrows = newton_polish(fn, z, tol)
            newton_steps += ns
            rows.extend(nrows)
            if gp <= tol and ep > 0.5 * geometry.kappa:
                z, e, gn = zp, ep, gp
                break
        if it >= max_iter:
            raise NoConvergence(f"mountain pass stalled at grad_norm={gn:.3e}", np.array(rows))
        s = min(1.0, 2.0 * step)
        while True:
            cand = z - s * g
            ec = fn.value(cand)
            if ec <= e - ARMIJO * s * gn * gn or s < 1e-14:
                break
            s *= 0.5
        step = s
        path[j], energies[j] = cand, ec
        it += 1
        _maybe_refine(path, energies, fn, j)
    if e < 0.5 * geometry.kappa:
        raise DegenerateToZero(f"critical level {e:.3e} below kappa/2", np.array(rows))
    return CriticalPoint(
        coeffs=z, energy=e, grad_norm=gn, iterations=it, cerami_trace=np.array(rows),
        method="mountain-pass", newton_steps=newton_steps, geometry=geometry,
    )


def _path_parameters(fn: Energy, end, nodes: int) -> np.ndarray:
    """Uniform nodes on [0, 1]; if no interior node sees positive energy,
    half of them are packed into [0, 2s*] around the ray maximizer s*."""
    s = np.linspace(0.0, 1.0, nodes)
    if max(fn.value(t * end) for t in s[1:-1]) > 0:
        return s
    fine = np.linspace(0.0, 1.0, 1025)[1:]
    top = 2.0 * fine[int(np.argmax([fn.value(t * end) for t in fine]))]
    if top >= 1.0:
        return s
    half = nodes // 2
    return np.concatenate([np.linspace(0.0, top, half + 1)[:-1], np.linspace(top, 1.0, nodes - half)])


def _repair_ridge(path, energies, fn, samples: int = 16):
    """Move a node onto the best point of the segments when the path has
    slipped across the ridge between two nodes (every node below κ)."""
    n = len(path)
    best, where = -np.inf, None
    for i in range(n - 1):
        for t in np.linspace(0.0, 1.0, samples + 2)[1:-1]:
            z = (1.0 - t) * path[i] + t * path[i + 1]
            v = fn.value(z)
            if v > best:
                best, where = v, (i, z)
    if where is None or best <= energies.max():
        return
    i, z = where
    k = i + 1 if i + 1 < n - 1 else i
    if 0 < k < n - 1:
        path[k], energies[k] = z, best


def _maybe_refine(path, energies, fn, j):
    """Re-space the nodes around j when its segments have grown far apart."""
    n = len(path)
    if j in (0, n - 1):
        return
    seg = [np.linalg.norm(path[i + 1] - path[i]) for i in range(n - 1)]
    mean = np.mean(seg)
    if max(seg[j - 1], seg[j]) > 4.0 * mean:
        for i in (j - 1, j + 1):
            if 0 < i < n - 1:
                path[i] = 0.5 * (path[i] + path[j])
                energies[i] = fn.value(path[i])


class _ReducedProblem:
    """Maximize E over Y ⊕ span{w}; coordinates s = (y-coeffs, t)."""

    def __init__(self, fn: Energy, Y, radius_cap: float):
        self.fn, self.Y, self.cap = fn, Y, radius_cap

    def maximize(self, w, s0, max_steps: int = 200, tol: float = 1e-13):
        fn = self.fn
        B = np.column_stack([self.Y, w])
        s = np.array(s0, dtype=float)
        u = B @ s
        e, r = fn.value_and_gradient(u)
        for _ in range(max_steps):
            gs = B.T @ r
            H = B.T @ fn.hessian(u) @ B
            try:
                evals = np.linalg.eigvalsh(H)
                if np.all(evals < 0):
                    d = -np.linalg.solve(H, gs)
                else:
                    d = gs / max(np.abs(evals).max(), 1.0)
            except np.linalg.LinAlgError:
                d = gs
            slope = float(gs @ d)
            if np.linalg.norm(gs) <= tol * max(1.0, abs(e)) or slope <= 0:
                break
            a = 1.0
            while a > 1e-12:
                cand = s + a * d
                if cand[-1] > 0:
                    uc = B @ cand
                    ec, rc = fn.value_and_gradient(uc)
                    if ec >= e + ARMIJO * a * slope:
                        break
                a *= 0.5
            else:
                break
            s, u, e, r = cand, uc, ec, rc
            if fn.norm(u) > self.cap:
                raise InnerMaxDiverged(f"inner ascent left the radius cap {self.cap:g}")
        return s, u, e, r


def linking_solve(forms, spec: NonlinearitySpec, decomposition, geometry: LinkingGeometry,
                  tol: float = TOL_LINKING, *, max_iter: int = MAX_ITER,
                  start=None, polish: bool = True, polish_threshold: float = 1e-2,
                  radius_cap: float | None = None) -> CriticalPoint:
    """Reduced-functional minimax over the negative subspace plus one direction.

    ``start`` optionally seeds the outer direction (e.g. a previous solution).
    """
    fn = Energy(forms, spec)
    Y = geometry.negative_basis
    d = Y.shape[1]
    cap = radius_cap if radius_cap is not None else 1e3 * geometry.R
    red = _ReducedProblem(fn, Y, cap)

    w0 = geometry.endpoint if start is None else np.asarray(start, dtype=float)
    w = _unit(forms, _project_out(forms, Y, w0))
    if start is not None:
        t0 = forms.norm(_project_out(forms, Y, w0))
        s = np.concatenate([Y.T @ (forms.A @ np.asarray(start, float)), [t0]])
    else:
        s = np.concatenate([np.zeros(d), [_ray_start(fn, w, geometry)]])
    s, u, e, r = red.maximize(w, s)

    rows = []
    it = 0
    step = 1.0
    newton_steps = 0
    while True:
        g = fn.riesz(r)
        gn = float(np.sqrt(max(g @ r, 0.0)))
        rows.append(_trace_row(fn, u, e, gn))
        if gn <= tol:
            break
        if polish and gn <= polish_threshold * (1.0 + fn.norm(u)):
            up, ep, gp, ns, nrows = newton_polish(fn, u, tol)
            newton_steps += ns
            rows.extend(nrows)
            if gp <= tol and ep > 0.5 * geometry.kappa:
                u, e, gn = up, ep, gp
                break
        if it >= max_iter:
            raise NoConvergence(f"linking descent stalled at grad_norm={gn:.3e}", np.array(rows))
        t = s[-1]
        gdir = _project_out(forms, Y, g)
        a = min(1.0, 2.0 * step)
        while True:
            wc = _unit(forms, w - a * gdir / t)
            try:
                sc, uc, ec, rc = red.maximize(wc, s)
                ok = ec <= e - ARMIJO * a * gn * gn / t
            except InnerMaxDiverged:
                ok = False
            if ok or a < 1e-14:
                break
            a *= 0.5
        if not ok:
            raise NoConvergence(f"line search failed at grad_norm={gn:.3e}", np.array(rows))
        step = a
        w, s, u, e, r = wc, sc, uc, ec, rc
        it += 1
    if e < 0.5 * geometry.kappa:
        raise DegenerateToZero(f"critical level {e:.3e} below kappa/2", np.array(rows))
    return CriticalPoint(
        coeffs=u, energy=e, grad_norm=gn, iterations=it, cerami_trace=np.array(rows),
        method="linking" if d else "linking(empty negative subspace)",
        newton_steps=newton_steps, geometry=geometry,
    )


def _ray_start(fn: Energy, w, geometry: LinkingGeometry) -> float:
    """Maximizer of t ↦ E(t w) on a coarse grid in (0, R]."""
    ts = np.linspace(0.0, geometry.R, 65)[1:]
    vals = [fn.value(t * w) for t in ts]
    return float(ts[int(np.argmax(vals))])


def solve(forms, spec: NonlinearitySpec, decomposition=None, tol: float | None = None,
          seed: int = 0, **kw) -> CriticalPoint:
    """Geometry search plus the matching solver."""
    geom = find_linking_geometry(forms, spec, decomposition, seed=seed)
    if geom.negative_dim:
        return linking_solve(forms, spec, decomposition, geom, tol or TOL_LINKING, **kw)
    return mountain_pass_solve(forms, spec, geom, tol or TOL_DEFINITE, **kw)
