"""Problem instances: box well potential, model nonlinearities, parameters.

A problem is

    Δ²u − a0 Δu + (λ b(x) + b0) u = f(u)

posed on a truncation box D with u = Δu = 0 on ∂D. The potential b vanishes
on the closed well Ω and equals ``outside_value`` on D \\ Ω (optionally joined
by a linear ramp of width ``ramp_width``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, InvalidExponent, InvalidGeometry, InvalidLambda, OutOfDomain


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``prod_i [lo_i, hi_i]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise InvalidGeometry("box corners must have equal, nonzero length")
        if any(h <= l for l, h in zip(lo, hi)):
            raise InvalidGeometry(f"degenerate box lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int) -> "Box":
        return cls((lo,) * dim, (hi,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lengths(self) -> np.ndarray:
        return np.subtract(self.hi, self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    def contains(self, x, closed=True) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        if closed:
            return np.all((x >= lo) & (x <= hi), axis=-1)
        return np.all((x > lo) & (x < hi), axis=-1)

    def strictly_inside(self, other: "Box") -> bool:
        """True if this box lies in the interior of ``other``."""
        return all(ol < l and h < oh for l, h, ol, oh in zip(self.lo, self.hi, other.lo, other.hi))

    def inside(self, other: "Box") -> bool:
        return all(ol <= l and h <= oh for l, h, ol, oh in zip(self.lo, self.hi, other.lo, other.hi))


@dataclass(frozen=True)
class WellPotential:
    """Indicator well: b = 0 on the closed box Ω, b = b_out elsewhere in D.

    ``truncation_box == well_box`` is accepted as the degenerate case b ≡ 0
    (no exterior region); it is how the well-bottom problem is posed.
    """

    well_box: Box
    truncation_box: Box
    outside_value: float = 1.0
    b_infty: float | None = None
    ramp_width: float = 0.0

    def __post_init__(self):
        if self.well_box.dim != self.truncation_box.dim:
            raise InvalidGeometry("well and truncation boxes differ in dimension")
        if not self.well_box.inside(self.truncation_box):
            raise InvalidGeometry("well box is not contained in the truncation box")
        if not self.outside_value > 0:
            raise InvalidGeometry("outside_value must be positive")
        if self.b_infty is None:
            object.__setattr__(self, "b_infty", float(self.outside_value))
        if not 0 < self.b_infty <= self.outside_value:
            raise InvalidGeometry("b_infty must lie in (0, outside_value]")
        if self.ramp_width < 0:
            raise InvalidGeometry("ramp_width must be nonnegative")

    @property
    def dim(self) -> int:
        return self.well_box.dim

    @property
    def degenerate(self) -> bool:
        return self.well_box == self.truncation_box

    @property
    def sublevel_measure(self) -> float:
        """Lebesgue measure of {b < b_infty}."""
        if self.ramp_width == 0:
            return self.well_box.volume
        pad = 2.0 * self.ramp_width * self.b_infty / self.outside_value
        lengths = np.minimum(self.well_box.lengths + pad, self.truncation_box.lengths)
        return float(np.prod(lengths))

    def __call__(self, x) -> np.ndarray:
        return eval_potential(self, x)


def eval_potential(well: WellPotential, x):
    """b(x) at one point or an ``(n, N)`` array of points.

    Points on ∂Ω belong to the closed well and get 0.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[-1] != well.dim:
        pts = pts.reshape(-1, well.dim)
    if not np.all(well.truncation_box.contains(pts)):
        raise OutOfDomain("point outside the truncation box")
    lo, hi = np.asarray(well.well_box.lo), np.asarray(well.well_box.hi)
    if well.ramp_width == 0:
        vals = np.where(well.well_box.contains(pts), 0.0, well.outside_value)
    else:
        dist = np.max(np.maximum(np.maximum(lo - pts, pts - hi), 0.0), axis=-1)
        vals = well.outside_value * np.minimum(1.0, dist / well.ramp_width)
    if np.ndim(x) <= 1 and np.size(x) == well.dim:
        return float(vals[0])
    return vals


NONLINEARITY_KINDS = ("power", "saturating")


@dataclass(frozen=True)
class NonlinearitySpec:
    """Model nonlinearity.

    power:       f(t) = |t|^(p-2) t
    saturating:  f(t) = l_infty t^3 / (1 + t^2)   (p = 2)

    ``l0`` adds the optional small-amplitude term l0 * t * exp(-t^2), whose
    primitive is (l0/2)(1 - exp(-t^2)).
    """

    kind: str = "power"
    p: float = 4.0
    l_infty: float = 1.0
    l0: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in NONLINEARITY_KINDS:
            raise ConfigError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "power":
            if not self.p > 2:
                raise InvalidExponent("power nonlinearity needs p > 2")
            object.__setattr__(self, "l_infty", 1.0)
        else:
            if self.p != 2:
                raise InvalidExponent("saturating nonlinearity has p = 2")
            if not self.l_infty > 0:
                raise ConfigError("saturating nonlinearity needs l_infty > 0")
        if self.l0 < 0:
            raise ConfigError("l0 must be nonnegative")

    @property
    def l_star(self) -> float | None:
        if self.kind == "power":
            return 1.0 - 2.0 / self.p
        return None

    @property
    def odd(self) -> bool:
        return True

    def f(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            out = np.abs(t) ** (self.p - 2) * t
        else:
            t2 = t * t
            out = self.l_infty * t * t2 / (1.0 + t2)
        if self.l0:
            out = out + self.l0 * t * np.exp(-t * t)
        return self.scale * out

    def F(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            out = np.abs(t) ** self.p / self.p
        else:
            t2 = t * t
            out = 0.5 * self.l_infty * (t2 - np.log1p(t2))
        if self.l0:
            out = out + 0.5 * self.l0 * (-np.expm1(-t * t))
        return self.scale * out

    def df(self, t):
        """f'(t)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            out = (self.p - 1) * np.abs(t) ** (self.p - 2)
        else:
            t2 = t * t
            out = self.l_infty * t2 * (3.0 + t2) / (1.0 + t2) ** 2
        if self.l0:
            out = out + self.l0 * (1.0 - 2.0 * t * t) * np.exp(-t * t)
        return self.scale * out


def eval_f(spec: NonlinearitySpec, t):
    """Return ``(f(t), F(t))``."""
    f, F = spec.f(t), spec.F(t)
    if np.ndim(f) == 0:
        return float(f), float(F)
    return f, F


def critical_exponent(N: int) -> float:
    """2* = 2N/(N-2); infinite for N <= 2."""
    return math.inf if N <= 2 else 2.0 * N / (N - 2)


@dataclass(frozen=True)
class ProblemParams:
    N: int
    a0: float
    b0: float
    lam: float
    well: WellPotential
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    modes_per_dim: int = 16
    quadrature_panels: int = 32

    def __post_init__(self):
        if self.N < 1 or self.well.dim != self.N:
            raise InvalidGeometry("dimension mismatch between N and the boxes")

    @property
    def lambda_floor(self) -> float:
        """max{0, -b0/b_infty}; forms need λ strictly above it."""
        return max(0.0, -self.b0 / self.well.b_infty)

    @property
    def indefinite(self) -> bool:
        return min(self.a0, self.b0) < 0

    def with_lambda(self, lam: float) -> "ProblemParams":
        return _replace(self, lam=float(lam))

    def limit_params(self) -> "ProblemParams":
        """Same instance with D = Ω (b ≡ 0)."""
        w = self.well
        well = WellPotential(w.well_box, w.well_box, w.outside_value, w.b_infty)
        return _replace(self, well=well)


def _replace(obj, **changes):
    import dataclasses

    return dataclasses.replace(obj, **changes)


def check_lambda(params: ProblemParams) -> None:
    if not params.lam > params.lambda_floor:
        raise InvalidLambda(
            f"lambda={params.lam:g} must exceed max(0, -b0/b_infty)={params.lambda_floor:g}"
        )


@dataclass(frozen=True)
class ConditionStatus:
    name: str
    status: str  # "pass", "relaxed", "formal", "not claimed"
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    conditions: tuple[ConditionStatus, ...]

    def status(self, name: str) -> str:
        for c in self.conditions:
            if c.name == name:
                return c.status
        raise KeyError(name)

    @property
    def formal(self) -> bool:
        return any(c.status == "formal" for c in self.conditions)


def validate(params: ProblemParams) -> ValidationReport:
    """Check the structural hypotheses; raise on hard failures."""
    well, nl, N = params.well, params.nonlinearity, params.N
    if not well.degenerate and not well.well_box.strictly_inside(well.truncation_box):
        raise InvalidGeometry("well box must lie in the interior of the truncation box")
    check_lambda(params)
    two_star = critical_exponent(N)
    if nl.p >= two_star:
        raise InvalidExponent(f"p={nl.p:g} is not below 2*={two_star:g} for N={N}")

    out = []
    if well.ramp_width > 0:
        out.append(ConditionStatus("B1", "pass", f"linear ramp of width {well.ramp_width:g}"))
    else:
        out.append(ConditionStatus("B1", "relaxed", "relaxed: piecewise constant"))
    out.append(ConditionStatus("B2", "pass", f"|{{b < b_infty}}| = {well.sublevel_measure:g}"))
    if well.degenerate:
        out.append(ConditionStatus("B3", "pass", "no exterior region: b = 0 on D"))
    else:
        out.append(ConditionStatus("B3", "pass", "box well; corners not smoothed"))
    out.append(ConditionStatus("F1", "pass", f"l0 = {nl.l0:g}"))
    if N <= 2:
        out.append(ConditionStatus("F2", "formal", f"p = {nl.p:g}, no critical exponent for N={N}"))
    else:
        out.append(ConditionStatus("F2", "pass", f"p = {nl.p:g} < 2* = {two_star:g}"))
    if nl.l0 == 0:
        out.append(ConditionStatus("F3", "pass", "f(t)/|t| nondecreasing"))
    else:
        out.append(ConditionStatus("F3", "not claimed", "extra small-amplitude term"))
    if nl.kind == "power" and nl.l0 == 0:
        out.append(ConditionStatus("F4", "pass", f"l_* = {nl.l_star:g}"))
    else:
        out.append(ConditionStatus("F4", "not claimed", ""))
    out.append(
        ConditionStatus("lambda", "pass", f"{params.lam:g} > {params.lambda_floor:g}")
    )
    return ValidationReport(tuple(out))


CONFIG_KEYS = {"N", "a0", "b0", "lambda", "well", "nonlinearity", "modes_per_dim", "quadrature_panels"}
WELL_KEYS = {"omega_min", "omega_max", "domain_min", "domain_max", "outside_value", "b_infty"}
NONLINEARITY_KEYS = {"kind", "p", "l_infty"}


def _corner(value, N: int) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),) * N
    value = tuple(float(v) for v in value)
    if len(value) != N:
        raise ConfigError(f"expected {N} coordinates, got {len(value)}")
    return value


def params_from_dict(cfg: dict) -> ProblemParams:
    """Build parameters from the JSON config schema (exact key sets)."""
    if not isinstance(cfg, dict) or set(cfg) != CONFIG_KEYS:
        raise ConfigError(f"config keys must be exactly {sorted(CONFIG_KEYS)}")
    w, nl = cfg["well"], cfg["nonlinearity"]
    if not isinstance(w, dict) or set(w) != WELL_KEYS:
        raise ConfigError(f"well keys must be exactly {sorted(WELL_KEYS)}")
    if not isinstance(nl, dict) or set(nl) != NONLINEARITY_KEYS:
        raise ConfigError(f"nonlinearity keys must be exactly {sorted(NONLINEARITY_KEYS)}")
    try:
        N = int(cfg["N"])
        well = WellPotential(
            well_box=Box(_corner(w["omega_min"], N), _corner(w["omega_max"], N)),
            truncation_box=Box(_corner(w["domain_min"], N), _corner(w["domain_max"], N)),
            outside_value=float(w["outside_value"]),
            b_infty=float(w["b_infty"]),
        )
        spec = NonlinearitySpec(
            kind=str(nl["kind"]),
            p=float(nl["p"]),
            l_infty=float(nl["l_infty"]) if nl["l_infty"] is not None else 1.0,
        )
        return ProblemParams(
            N=N,
            a0=float(cfg["a0"]),
            b0=float(cfg["b0"]),
            lam=float(cfg["lambda"]),
            well=well,
            nonlinearity=spec,
            modes_per_dim=int(cfg["modes_per_dim"]),
            quadrature_panels=int(cfg["quadrature_panels"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def params_to_dict(params: ProblemParams) -> dict:
    w, nl = params.well, params.nonlinearity
    return {
        "N": params.N,
        "a0": params.a0,
        "b0": params.b0,
        "lambda": params.lam,
        "well": {
            "omega_min": list(w.well_box.lo),
            "omega_max": list(w.well_box.hi),
            "domain_min": list(w.truncation_box.lo),
            "domain_max": list(w.truncation_box.hi),
            "outside_value": w.outside_value,
            "b_infty": w.b_infty,
        },
        "nonlinearity": {"kind": nl.kind, "p": nl.p, "l_infty": nl.l_infty},
        "modes_per_dim": params.modes_per_dim,
        "quadrature_panels": params.quadrature_panels,
    }


def load_config(path: str | Path) -> ProblemParams:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return params_from_dict(cfg)


def box_problem(
    N: int = 1,
    a0: float = 0.0,
    b0: float = 0.0,
    lam: float = 100.0,
    omega: Sequence[float] = (0.0, 1.0),
    domain: Sequence[float] | None = (-1.0, 2.0),
    outside_value: float = 1.0,
    b_infty: float | None = None,
    nonlinearity: NonlinearitySpec | None = None,
    modes_per_dim: int = 16,
    quadrature_panels: int = 32,
) -> ProblemParams:
    """Convenience constructor for cube wells; ``domain=None`` means D = Ω."""
    om = Box.cube(omega[0], omega[1], N)
    dom = om if domain is None else Box.cube(domain[0], domain[1], N)
    return ProblemParams(
        N=N,
        a0=float(a0),
        b0=float(b0),
        lam=float(lam),
        well=WellPotential(om, dom, float(outside_value), b_infty),
        nonlinearity=nonlinearity or NonlinearitySpec(),
        modes_per_dim=modes_per_dim,
        quadrature_panels=quadrature_panels,
    )
