"""Closed-form spectral data of the well bottom and the explicit constants.

Everything here is analytic: Dirichlet-Laplacian eigenvalues of a box,
the limit Rayleigh levels β_j⁰, the index k₀*, the embedding constants
S, A_∞, C_λ, d₀ and the thresholds Λ_k, d_*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .errors import DimensionTooLow, NotFound, UndefinedForm
from .model_config import Box, ProblemParams, check_lambda, critical_exponent

# B0 in ||∇u||² <= B0² ||Δu|| ||u||; integration by parts gives 1.
GN_CONSTANT = 1.0

_CLUSTER_RTOL = 1e-12


@dataclass(frozen=True)
class SpectralSetup:
    mu: np.ndarray  # first `count` eigenvalues of -Δ on Ω, with multiplicity
    mu_bar: np.ndarray  # distinct values among them
    multiplicities: np.ndarray  # dim N_j of each distinct level (full, not truncated)
    omega: Box
    a0: float | None = None
    b0: float | None = None
    beta0: np.ndarray | None = None
    k0_star: int | None = None
    linking_admissible: bool | None = None
    limit_spectrum: np.ndarray | None = None

    @property
    def count(self) -> int:
        return len(self.mu)


@dataclass(frozen=True)
class EmbeddingConstants:
    S: float
    B0: float
    A_infty: float
    C_lambda: float
    d0: float
    branch: str  # "a0>0" or "a0<=0"


@dataclass(frozen=True)
class ThresholdSet:
    Lambda_k: np.ndarray
    d_star: float
    linking_admissible: bool


def _cluster(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    distinct, counts = [], []
    for v in values:
        if distinct and abs(v - distinct[-1]) <= _CLUSTER_RTOL * abs(v):
            counts[-1] += 1
        else:
            distinct.append(v)
            counts.append(1)
    return np.array(distinct), np.array(counts, dtype=int)


def box_laplacian_eigenvalues(omega: Box, count: int) -> np.ndarray:
    """Smallest ``count`` values of π² Σ (k_i/L_i)², k_i >= 1, sorted."""
    L = omega.lengths
    base = (np.pi / L) ** 2
    kmax = max(1, int(math.ceil(count ** (1.0 / omega.dim))))
    while True:
        ks = np.arange(1, kmax + 1)
        grids = np.meshgrid(*([ks**2] * omega.dim), indexing="ij")
        vals = np.sort(sum(b * g for b, g in zip(base, grids)).ravel())
        if len(vals) >= count:
            # any index beyond kmax exceeds this bound
            floor = np.min(base * (kmax + 1) ** 2 + (base.sum() - base))
            if vals[count - 1] < floor:
                return vals, floor
        kmax *= 2


def dirichlet_mu(omega: Box, count: int) -> SpectralSetup:
    """Dirichlet eigenvalues of -Δ on a box with multiplicity bookkeeping."""
    if count < 1:
        raise ValueError("count must be >= 1")
    vals, floor = box_laplacian_eigenvalues(omega, count)
    mu = vals[:count]
    complete = vals[vals < floor]
    _, counts_all = _cluster(complete)
    mu_bar, _ = _cluster(mu)
    mult = counts_all[: len(mu_bar)]
    return SpectralSetup(mu=mu, mu_bar=mu_bar, multiplicities=mult, omega=omega)


def _require_indefinite(a0: float, b0: float) -> None:
    if min(a0, b0) >= 0:
        raise UndefinedForm("min(a0, b0) >= 0: the negative-part form vanishes")


def beta0_formula(mu_bar, a0: float, b0: float):
    num = mu_bar**2 + max(a0, 0.0) * mu_bar + max(b0, 0.0)
    den = max(-a0, 0.0) * mu_bar + max(-b0, 0.0)
    return num / den


def beta0(j: int, a0: float, b0: float, setup: SpectralSetup) -> float:
    """β_j⁰ for the j-th distinct level (1-based)."""
    _require_indefinite(a0, b0)
    if not 1 <= j <= len(setup.mu_bar):
        raise IndexError(f"level {j} outside the computed range 1..{len(setup.mu_bar)}")
    return float(beta0_formula(setup.mu_bar[j - 1], a0, b0))


def k0_star(a0: float, b0: float, setup: SpectralSetup) -> tuple[int, bool]:
    """First level index with β_k⁰ > 1, and whether β_{k-1}⁰ < 1 strictly."""
    _require_indefinite(a0, b0)
    betas = beta0_formula(setup.mu_bar, a0, b0)
    above = np.nonzero(betas > 1.0)[0]
    if len(above) == 0:
        raise NotFound("no beta0 > 1 in the computed spectrum; enlarge count")
    k = int(above[0]) + 1
    admissible = k == 1 or bool(betas[k - 2] < 1.0)
    return k, admissible


def limit_spectrum(a0: float, b0: float, setup: SpectralSetup, count: int | None = None) -> np.ndarray:
    """Sorted {μ_k² + a0 μ_k + b0} over the first ``count`` μ_k."""
    mu = setup.mu if count is None else setup.mu[:count]
    return np.sort(mu**2 + a0 * mu + b0)


def spectral_setup(omega: Box, a0: float, b0: float, count: int = 32) -> SpectralSetup:
    """Eigenvalue data plus every derived list; grows ``count`` until k₀* is found."""
    while True:
        base = dirichlet_mu(omega, count)
        if min(a0, b0) >= 0:
            return replace(base, a0=a0, b0=b0, limit_spectrum=limit_spectrum(a0, b0, base))
        try:
            k, adm = k0_star(a0, b0, base)
        except NotFound:
            count *= 2
            continue
        return replace(
            base,
            a0=a0,
            b0=b0,
            beta0=beta0_formula(base.mu_bar, a0, b0),
            k0_star=k,
            linking_admissible=adm,
            limit_spectrum=limit_spectrum(a0, b0, base),
        )


def sobolev_constant(N: int) -> float:
    """Sharp constant of ||∇u||² >= S ||u||²_{2*}: πN(N-2)(Γ(N/2)/Γ(N))^{2/N}."""
    if N <= 2:
        raise DimensionTooLow("the Sobolev constant needs N >= 3")
    return math.pi * N * (N - 2) * math.exp((2.0 / N) * (gammaln(N / 2) - gammaln(N)))


def embedding_constants(params: ProblemParams) -> EmbeddingConstants:
    N, a0 = params.N, params.a0
    if N <= 2:
        raise DimensionTooLow("embedding constants need N >= 3")
    check_lambda(params)
    S = sobolev_constant(N)
    two_star = critical_exponent(N)
    A_inf = params.well.sublevel_measure ** ((two_star - 2) / two_star) / S
    tail = 1.0 / (params.lam * params.well.b_infty + params.b0)
    if a0 > 0:
        d0 = A_inf / a0
        C = d0 + tail
        branch = "a0>0"
    else:
        d0 = 4.0 * A_inf**2 * GN_CONSTANT**4
        C = d0 + 2.0 * tail
        branch = "a0<=0"
    return EmbeddingConstants(S=S, B0=GN_CONSTANT, A_infty=A_inf, C_lambda=C, d0=d0, branch=branch)


def lambda_threshold(k: int, params: ProblemParams, setup: SpectralSetup, B0: float = GN_CONSTANT) -> float:
    """Λ_k = ((max{-a0,0} β_k⁰)² B0⁴ - b0) / b_∞."""
    a0, b0 = params.a0, params.b0
    b = beta0(k, a0, b0, setup)
    return ((max(-a0, 0.0) * b) ** 2 * B0**4 - b0) / params.well.b_infty


def d_star(a0: float, b0: float, setup: SpectralSetup) -> float:
    """Optimal constant of ||u||_{Ω,0} <= d_* ||u||_{L²} on the first k₀* levels."""
    k, _ = k0_star(a0, b0, setup)
    mu = setup.mu_bar[:k]
    return float(np.max(np.sqrt(mu**2 + max(a0, 0.0) * mu + max(b0, 0.0))))


def thresholds(params: ProblemParams, setup: SpectralSetup) -> ThresholdSet:
    a0, b0 = params.a0, params.b0
    k, adm = k0_star(a0, b0, setup)
    lams = np.array([lambda_threshold(j, params, setup) for j in range(1, len(setup.mu_bar) + 1)])
    return ThresholdSet(Lambda_k=lams, d_star=d_star(a0, b0, setup), linking_admissible=adm)


def lemma_window(a0: float, b0: float, setup: SpectralSetup) -> tuple[float, float]:
    """(1 - 1/β_{k₀*}⁰, d_*): the asymptotically linear case needs l_∞/d_* above the first."""
    k, _ = k0_star(a0, b0, setup)
    return 1.0 - 1.0 / beta0(k, a0, b0, setup), d_star(a0, b0, setup)


def constants_table(params: ProblemParams, count: int = 8) -> list[tuple[str, float, str]]:
    """Rows (name, value, formula_branch) for the CLI ``constants`` command."""
    a0, b0 = params.a0, params.b0
    setup = spectral_setup(params.well.well_box, a0, b0, count)
    rows: list[tuple[str, float, str]] = []
    for j, m in enumerate(setup.mu_bar[:count], start=1):
        rows.append((f"mu_bar_{j}", float(m), f"multiplicity={int(setup.multiplicities[j - 1])}"))
    for j, v in enumerate(setup.limit_spectrum[:count], start=1):
        rows.append((f"limit_spectrum_{j}", float(v), "mu^2+a0*mu+b0"))
    if params.indefinite:
        for j, b in enumerate(setup.beta0[:count], start=1):
            rows.append((f"beta0_{j}", float(b), "closed form"))
        rows.append(("k0_star", float(setup.k0_star), "first beta0>1"))
        rows.append(("linking_admissible", float(setup.linking_admissible), "beta0_{k0*-1}<1"))
        rows.append(("d_star", d_star(a0, b0, setup), "max over levels<=k0*"))
        for j in range(1, min(count, len(setup.mu_bar)) + 1):
            rows.append((f"Lambda_{j}", lambda_threshold(j, params, setup), "B0=1"))
    else:
        rows.append(("k0_star", float("nan"), "definite: mountain pass"))
    if params.N >= 3:
        ec = embedding_constants(params)
        rows += [
            ("S", ec.S, "Talenti"),
            ("B0", ec.B0, "integration by parts"),
            ("A_infty", ec.A_infty, "|B_inf|^((2*-2)/2*)/S"),
            ("C_lambda", ec.C_lambda, ec.branch),
            ("d0", ec.d0, ec.branch),
        ]
    rows.append(("lambda_floor", params.lambda_floor, "max(0,-b0/b_infty)"))
    return rows

