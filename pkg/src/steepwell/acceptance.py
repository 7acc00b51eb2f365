"""Acceptance checks, runnable from pytest and from ``steepwell check``.

Each check returns a ``CheckResult``; tolerances are fixed here and nowhere
else. Runtime limits are wall-clock on the reporting machine.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.special import gamma

from .concentration import sweep
from .constants import (
    beta0_formula,
    dirichlet_mu,
    embedding_constants,
    k0_star,
    lemma_window,
    limit_spectrum,
    sobolev_constant,
    spectral_setup,
)
from .discretization import forms_for
from .errors import GeometryNotFound, PrerequisiteFailed, SteepWellError
from .model_config import NonlinearitySpec, ProblemParams, load_config
from .spectral import eigen_convergence_sweep, form_bounds_check, solve_pencil
from .variational import (
    Energy,
    energy_and_gradient,
    euler_lagrange_residual,
    find_linking_geometry,
    linking_solve,
)

LAMBDA_DECADES = (1e2, 1e3, 1e4, 1e5, 1e6)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    runtime: float
    limit: float
    values: dict = dataclasses.field(default_factory=dict)

    @property
    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.number}. {self.name}: {self.detail} ({self.runtime:.2f}s / {self.limit:g}s)"


def shipped_config(name: str) -> ProblemParams:
    with resources.as_file(resources.files("steepwell") / "configs" / f"{name}.json") as path:
        return load_config(path)


def _timed(number, name, limit, fn):
    t0 = time.perf_counter()
    try:
        passed, detail, values = fn()
    except SteepWellError as exc:
        passed, detail, values = False, f"{type(exc).__name__}: {exc}", {}
    runtime = time.perf_counter() - t0
    if runtime > limit:
        passed = False
        detail += f"; runtime {runtime:.2f}s over limit"
    return CheckResult(number, name, passed, detail, runtime, limit, values)


def _indefinite_well(m: int = 24) -> ProblemParams:
    return dataclasses.replace(shipped_config("indefinite_1d"), modes_per_dim=m)


def check_eigen_formula() -> CheckResult:
    def run():
        p = _indefinite_well().limit_params()
        dec = solve_pencil(forms_for(p), 5)
        setup = dirichlet_mu(p.well.well_box, 5)
        ref = beta0_formula(setup.mu, p.a0, p.b0)
        err = float(np.max(np.abs(dec.betas - ref) / ref))
        return err <= 1e-10, f"max rel err {err:.2e} (tol 1e-10)", {"max_rel_err": err}

    return _timed(1, "eigenvalue formula oracle", 1.0, run)


def check_eigen_convergence() -> CheckResult:
    def run():
        p = _indefinite_well()
        table = eigen_convergence_sweep(p, LAMBDA_DECADES, count=3)
        mono = all(
            np.all(np.diff(table.column("beta_k", k)) >= -1e-12 * table.column("beta_k", k)[:-1])
            for k in (1, 2, 3)
        )
        rel = [table.column("rel_err", k)[-1] for k in (1, 2, 3)]
        close = all(r <= 5e-2 for r in rel)
        om = table.column("outside_mass", 1)
        decreasing = bool(np.all(np.diff(om) < 0))
        detail = (
            f"monotone={mono}; rel err at 1e6 = {', '.join(f'{r:.3g}' for r in rel)} "
            f"(tol 5e-2); beta(1e6) = {', '.join(f'{b:.4g}' for b in table.column('beta_k')[-3:])}; "
            f"outside mass decreasing={decreasing}"
        )
        return mono and close and decreasing, detail, {"rel_err": rel, "outside_mass": om.tolist()}

    return _timed(2, "pencil convergence in lambda", 30.0, run)


def check_form_bounds() -> CheckResult:
    def run():
        p = _indefinite_well()
        setup = spectral_setup(p.well.well_box, p.a0, p.b0)
        k, _ = k0_star(p.a0, p.b0, setup)
        forms = forms_for(p)
        dec = solve_pencil(forms, k + 2)
        try:
            rep = form_bounds_check(forms, dec, k, samples=1000, seed=0)
        except PrerequisiteFailed as exc:
            return False, f"PrerequisiteFailed: {exc}", {"betas": dec.betas.tolist()}
        ok = rep.holds(1e-8)
        detail = (
            f"upper margin {rep.worst_upper_margin:.3e}, lower margin {rep.worst_lower_margin:.3e}, "
            f"identity err {rep.identity_errors.max():.2e}"
        )
        return ok, detail, {}

    return _timed(3, "form bounds on negative subspace and complement", 10.0, run)


def gradient_error_ratios(params: ProblemParams, pairs: int = 50, eps: float = 1e-2, seed: int = 0):
    """error(eps/2)/error(eps) for central differences of E against ⟨g, h⟩_λ."""
    forms = forms_for(params)
    fn = Energy(forms, params.nonlinearity)
    rng = np.random.default_rng(seed)
    n = forms.A.shape[0]
    ratios = []
    for _ in range(pairs):
        u = rng.standard_normal(n) / (1.0 + np.arange(n))
        u *= 5.0 / np.max(np.abs(forms.basis.synthesize(u)))
        h = rng.standard_normal(n) / (1.0 + np.arange(n))
        h /= np.max(np.abs(forms.basis.synthesize(h)))
        st = energy_and_gradient(forms, params.nonlinearity, u)
        exact = float(st.grad @ forms.A @ h)
        errs = []
        for e in (eps, eps / 2):
            fd = (fn.value(u + e * h) - fn.value(u - e * h)) / (2 * e)
            errs.append(abs(fd - exact))
        ratios.append(errs[1] / errs[0])
    return np.array(ratios)


def check_gradient() -> CheckResult:
    def run():
        r = gradient_error_ratios(_indefinite_well())
        ok = bool(np.all((r >= 0.15) & (r <= 0.35)))
        return ok, f"ratios in [{r.min():.4f}, {r.max():.4f}] (tol [0.15, 0.35])", {"ratios": r.tolist()}

    return _timed(4, "energy gradient by central differences", 5.0, run)


def _solve_linking(p: ProblemParams, seed: int = 0):
    forms = forms_for(p)
    dec = solve_pencil(forms, 6)
    geom = find_linking_geometry(forms, p.nonlinearity, dec, seed=seed)
    cp = linking_solve(forms, p.nonlinearity, dec, geom, 1e-6)
    return forms, dec, geom, cp


def check_superlinear() -> CheckResult:
    def run():
        p = _indefinite_well()
        forms, dec, geom, cp = _solve_linking(p)
        res = euler_lagrange_residual(forms, p.nonlinearity, cp.coeffs)
        ints = Energy(forms, p.nonlinearity).nonlinear_integrals(cp.coeffs)
        lhs, rhs = 0.5 * ints["int_fu_minus_2F"], 0.25 * ints["lp_norm_p"]
        ident = abs(lhs - rhs) / abs(rhs)
        ok = res <= 1e-6 and cp.energy > 0 and ident <= 1e-8
        detail = (
            f"residual {res:.2e}, energy {cp.energy:.6g}, F4 identity rel err {ident:.1e}, "
            f"negative subspace dim {geom.negative_dim}"
        )
        return ok, detail, {"energy": cp.energy, "residual": res}

    return _timed(5, "superlinear existence (power p=4)", 120.0, run)


def check_asymptotically_linear() -> CheckResult:
    def run():
        base = _indefinite_well()
        setup = spectral_setup(base.well.well_box, base.a0, base.b0)
        spec_vals = limit_spectrum(base.a0, base.b0, setup)
        l_inf = 0.5 * (spec_vals[0] + spec_vals[1])
        edge, dstar = lemma_window(base.a0, base.b0, setup)
        in_window = l_inf / dstar > edge and not np.any(np.isclose(spec_vals, l_inf))
        p = dataclasses.replace(base, nonlinearity=NonlinearitySpec("saturating", 2.0, l_inf))
        forms, dec, geom, cp = _solve_linking(p)
        res = euler_lagrange_residual(forms, p.nonlinearity, cp.coeffs)
        solved = res <= 1e-6 and cp.energy > 0

        low = 0.5 * edge * dstar
        q = dataclasses.replace(base, nonlinearity=NonlinearitySpec("saturating", 2.0, low))
        try:
            find_linking_geometry(forms_for(q), q.nonlinearity, solve_pencil(forms_for(q), 6))
            refused = False
        except GeometryNotFound:
            refused = True
        detail = (
            f"l_inf={l_inf:.4g} in window={in_window}, residual {res:.2e}, energy {cp.energy:.6g}; "
            f"l_inf={low:.4g} below window -> GeometryNotFound={refused}"
        )
        return in_window and solved and refused, detail, {"energy": cp.energy, "residual": res}

    return _timed(6, "asymptotically linear existence (saturating)", 120.0, run)


def check_concentration() -> CheckResult:
    def run():
        parts, ok, values = [], True, {}
        for name in ("definite_1d", "indefinite_1d"):
            p = shipped_config(name)
            rep = sweep(p, (1e2, 1e3, 1e4))
            if any(r.status != "ok" for r in rep.rows):
                ok = False
                parts.append(f"{name}: failed rows")
                continue
            om = rep.column("outside_mass")
            h2 = rep.column("h2_distance")
            lo, hi = rep.energy_interval
            factor = om[0] / om[-1]
            h2_down = h2[-1] < h2[-2]
            case_ok = factor >= 10 and h2_down and lo > 0 and math.isfinite(hi)
            ok &= case_ok
            parts.append(
                f"{name}: mass factor {factor:.3g}, h2 {h2[-2]:.4g}->{h2[-1]:.4g}, "
                f"energy in [{lo:.4g}, {hi:.4g}]"
            )
            values[name] = {"outside_mass": om.tolist(), "h2": h2.tolist(), "energy": rep.column("energy").tolist()}
        return ok, "; ".join(parts), values

    return _timed(7, "concentration as lambda grows", 300.0, run)


def independent_sobolev(N: int) -> float:
    """S = N(N-2)/4 · |S^N|^{2/N}, |S^N| = 2π^{(N+1)/2}/Γ((N+1)/2)."""
    area = 2.0 * math.pi ** ((N + 1) / 2) / gamma((N + 1) / 2)
    return N * (N - 2) / 4.0 * area ** (2.0 / N)


def check_constants() -> CheckResult:
    def run():
        p = shipped_config("constants_3d")
        S = sobolev_constant(3)
        s_err = abs(S - independent_sobolev(3)) / independent_sobolev(3)
        ec = embedding_constants(p.with_lambda(1e6))
        gap = (ec.C_lambda - ec.d0) / ec.d0
        setup = spectral_setup(p.well.well_box, p.a0, p.b0)
        k, adm = k0_star(p.a0, p.b0, setup)
        ok = s_err <= 1e-4 and abs(S - 5.4779) <= 1e-4 * 5.4779 and gap <= 1e-5 and k == 2
        detail = f"S={S:.6f} (rel err {s_err:.1e}), C_lambda gap at 1e6 = {gap:.3e} (tol 1e-5), k0*={k}"
        return ok, detail, {"S": S, "gap": gap, "k0_star": k}

    return _timed(8, "constants certification", 1.0, run)


def check_determinism() -> CheckResult:
    """Run the artifact-producing commands twice and compare bytes."""

    def run():
        import contextlib
        import filecmp
        import io
        import tempfile
        from pathlib import Path

        from .cli import main

        with tempfile.TemporaryDirectory() as tmp:
            dirs = [Path(tmp) / "a", Path(tmp) / "b"]
            for d in dirs:
                cfg = resources.files("steepwell") / "configs" / "indefinite_1d.json"
                with resources.as_file(cfg) as path:
                    for cmd in (["constants"], ["spectrum", "--lambda-grid", "1e2,1e4"],
                                ["solve"], ["sweep", "--lambda-grid", "1e2,1e3"]):
                        with contextlib.redirect_stdout(io.StringIO()):
                            main([*cmd, str(path), "--out-dir", str(d), "--seed", "0"])
            files = sorted(p.name for p in dirs[0].glob("*.csv"))
            same = [filecmp.cmp(dirs[0] / f, dirs[1] / f, shallow=False) for f in files]
            return bool(files) and all(same), f"{sum(same)}/{len(files)} CSV artifacts identical", {}

    return _timed(9, "determinism of artifacts", 300.0, run)


ALL_CHECKS = (
    check_eigen_formula,
    check_eigen_convergence,
    check_form_bounds,
    check_gradient,
    check_superlinear,
    check_asymptotically_linear,
    check_concentration,
    check_constants,
    check_determinism,
)


def run_all(include_determinism: bool = True) -> list[CheckResult]:
    checks = ALL_CHECKS if include_determinism else ALL_CHECKS[:-1]
    return [c() for c in checks]
