"""Growth-rate families, the biogas-flow map phi and its maximizers.

All functions take the substrate ``s`` and biomass ``x`` (or the reduced
coordinate ``z = x / (s_in - s)``) as plain floats. The kinetic expressions
also accept numpy arrays, which the batch simulator and the assumption
checker rely on.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import AssumptionError, ConfigError, DomainError, NumericError

KINDS = ("monod", "haldane", "contois", "custom")

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
GRID_POINTS = 512
S_BAR_TOL = 1e-10


@dataclass(frozen=True)
class GrowthModel:
    """Specific growth rate mu(s, x).

    ``mu_max`` is used by Monod and Contois, ``mu_bar`` by Haldane. ``K_s`` is
    a concentration for Monod/Haldane and a dimensionless ratio for Contois.
    A ``custom`` model wraps a user function ``func(s, x)``; set
    ``density_dependent=False`` when it ignores ``x``.
    """

    kind: str
    mu_max: float = 0.0
    mu_bar: float = 0.0
    K_s: float = 0.0
    K_i: float = 0.0
    func: Optional[Callable] = None
    density_dependent: bool = True
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown growth model kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise DomainError("custom growth model needs a rate function")

    @classmethod
    def monod(cls, mu_max, K_s):
        return cls("monod", mu_max=mu_max, K_s=K_s, density_dependent=False)

    @classmethod
    def haldane(cls, mu_bar, K_s, K_i):
        return cls("haldane", mu_bar=mu_bar, K_s=K_s, K_i=K_i, density_dependent=False)

    @classmethod
    def contois(cls, mu_max, K_s):
        return cls("contois", mu_max=mu_max, K_s=K_s)

    @classmethod
    def custom(cls, func, density_dependent=True, name="custom"):
        return cls("custom", func=func, density_dependent=density_dependent, name=name)

    @property
    def parameters(self) -> dict:
        if self.kind == "monod":
            return {"mu_max": self.mu_max, "K_s": self.K_s}
        if self.kind == "haldane":
            return {"mu_bar": self.mu_bar, "K_s": self.K_s, "K_i": self.K_i}
        if self.kind == "contois":
            return {"mu_max": self.mu_max, "K_s": self.K_s}
        return {}

    def rate_function(self) -> Callable:
        """Return an unchecked ``mu(s, x)`` closure over float parameters.

        This is the hot path of the integrator, so no domain checks happen
        here.
        """
        if self.kind == "monod":
            m, k = float(self.mu_max), float(self.K_s)

            def rate(s, x):
                return m * s / (k + s)

        elif self.kind == "haldane":
            m, k, ki = float(self.mu_bar), float(self.K_s), float(self.K_i)

            def rate(s, x):
                return m * s / (k + s + s * s / ki)

        elif self.kind == "contois":
            m, k = float(self.mu_max), float(self.K_s)

            def rate(s, x):
                return m * s / (k * x + s)

        else:
            rate = self.func
        return rate

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.parameters}

    @classmethod
    def from_dict(cls, data: dict) -> "GrowthModel":
        data = dict(data)
        kind = str(data.pop("kind", "")).lower()
        required = {
            "monod": ("mu_max", "K_s"),
            "haldane": ("mu_bar", "K_s", "K_i"),
            "contois": ("mu_max", "K_s"),
        }
        if kind not in required:
            raise ConfigError(f"model.kind: expected one of monod/haldane/contois, got {kind!r}")
        unknown = sorted(set(data) - set(required[kind]))
        if unknown:
            raise ConfigError(f"model.{unknown[0]}: unknown key for {kind} model")
        values = {}
        for key in required[kind]:
            if key not in data:
                raise ConfigError(f"model.{key}: missing for {kind} model")
            try:
                values[key] = float(data.pop(key))
            except (TypeError, ValueError):
                raise ConfigError(f"model.{key}: not a number") from None
        return getattr(cls, kind)(**values)


@dataclass(frozen=True)
class ProcessParams:
    s_in: float
    u_max: float

    def validate(self):
        if not (self.s_in > 0):
            raise DomainError(f"s_in must be positive, got {self.s_in}")
        if not (self.u_max >= 0):
            raise DomainError(f"u_max must be non-negative, got {self.u_max}")


# ---------------------------------------------------------------------------
# Point evaluations
# ---------------------------------------------------------------------------


def mu(model: GrowthModel, s: float, x: float) -> float:
    """Specific growth rate, with domain checks."""
    if s < 0:
        raise DomainError(f"negative substrate s={s}")
    if model.density_dependent and not x > 0:
        raise DomainError(f"biomass must be positive for {model.kind}, got x={x}")
    return model.rate_function()(s, x)


def phi(model: GrowthModel, params: ProcessParams, s: float, z: float) -> float:
    """Biogas flow factor mu(s, (s_in - s) z) * (s_in - s)."""
    if not 0.0 <= s <= params.s_in:
        raise DomainError(f"s={s} outside [0, s_in={params.s_in}]")
    if not z > 0:
        raise DomainError(f"z must be positive, got {z}")
    w = params.s_in - s
    if w == 0.0:
        return 0.0
    return model.rate_function()(s, w * z) * w


def _phi_vec(rate, s_in, s, z):
    w = s_in - s
    return rate(s, w * z) * w


def _golden_max(f, a, b, tol):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@lru_cache(maxsize=4096)
def _s_bar_cached(model: GrowthModel, s_in: float, z: float) -> float:
    rate = model.rate_function()
    eps = 1e-9 * s_in
    lo, hi = eps, s_in - eps
    grid = np.linspace(lo, hi, GRID_POINTS)
    with np.errstate(all="ignore"):
        vals = np.asarray(_phi_vec(rate, s_in, grid, z), dtype=float)
    if vals.shape != grid.shape:
        vals = np.array([_phi_vec(rate, s_in, g, z) for g in grid])
    if not np.all(np.isfinite(vals)):
        raise NumericError(f"phi not finite on the maximizer grid at z={z}")
    i = int(np.argmax(vals))
    # unimodality guard: rise up to the grid maximum, fall after it
    slack = 1e-12 * max(float(vals[i]), 1e-300)
    rises = np.diff(vals[: i + 1])
    falls = np.diff(vals[i:])
    if (rises.size and rises.min() < -slack) or (falls.size and falls.max() > slack):
        raise AssumptionError(
            f"phi(., z={z}) has several local maxima on the grid; "
            "unique maximizer assumption violated"
        )
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, GRID_POINTS - 1)]

    def f(s):
        return _phi_vec(rate, s_in, s, z)

    s_star = _golden_max(f, a, b, S_BAR_TOL)
    return _polish(f, s_star, a, b, s_in)


def _polish(f, s0, a, b, s_in):
    """Refine a golden-section estimate by a root of the 4-point derivative.

    Comparisons of phi stop discriminating at |s - s_bar| ~ sqrt(eps) * scale,
    well above the 1e-10 target, so the last digits come from the derivative.
    """
    h = 1e-4 * s_in

    def dphi(s):
        return (8.0 * (f(s + h) - f(s - h)) - (f(s + 2 * h) - f(s - 2 * h))) / (12.0 * h)

    lo = max(a, 2 * h + 1e-9 * s_in)
    hi = min(b, s_in - 2 * h - 1e-9 * s_in)
    if not lo < s0 < hi:
        return s0
    width = 1e-5 * s_in
    left, right = max(lo, s0 - width), min(hi, s0 + width)
    dl, dr = dphi(left), dphi(right)
    if dl > 0 > dr:
        return brentq(dphi, left, right, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    return s0


def s_bar(model: GrowthModel, params: ProcessParams, z1: float) -> float:
    """Unique maximizer of s -> phi(s, z1) on (0, s_in)."""
    if not z1 > 0:
        raise DomainError(f"z1 must be positive, got {z1}")
    if not model.density_dependent:
        z1 = 1.0
    return _s_bar_cached(model, float(params.s_in), float(z1))


def phi_bar(model: GrowthModel, params: ProcessParams, z: float) -> float:
    return phi(model, params, s_bar(model, params, z), z)


def s_bar_slope(model: GrowthModel, params: ProcessParams, z: float, h: float | None = None) -> float:
    """ds_bar/dz by central difference on the maximizer curve."""
    if not z > 0:
        raise DomainError(f"z must be positive, got {z}")
    if not model.density_dependent:
        return 0.0
    if h is None:
        h = 1e-4 * max(1.0, z)
    h = min(h, 0.5 * z)
    return (s_bar(model, params, z + h) - s_bar(model, params, z - h)) / (2.0 * h)


# ---------------------------------------------------------------------------
# Maximizer curve
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaximizerCurve:
    """Tabulated maximizer curve z -> s_bar(z) on a uniform z grid.

    Between nodes the curve is the cubic Hermite interpolant of the tabulated
    values and slopes; :meth:`evaluate` returns the interpolant and its exact
    derivative so the feedback that tracks the curve stays consistent with it.
    """

    z_grid: tuple
    s_bar: tuple
    phi_at_max: tuple
    s_bar_slope: tuple

    @property
    def z_min(self):
        return self.z_grid[0]

    @property
    def z_max(self):
        return self.z_grid[-1]

    def evaluate(self, z):
        """Return ``(s_bar(z), ds_bar/dz)`` from the Hermite interpolant."""
        zg = self.z_grid
        n = len(zg)
        if n == 1:
            if abs(z - zg[0]) > 1e-9:
                raise DomainError(f"z={z} outside tabulated maximizer curve [{zg[0]}, {zg[0]}]")
            return self.s_bar[0], self.s_bar_slope[0]
        if not zg[0] - 1e-12 <= z <= zg[-1] + 1e-12:
            raise DomainError(f"z={z} outside tabulated maximizer curve [{zg[0]}, {zg[-1]}]")
        i = bisect.bisect_right(zg, z) - 1
        i = min(max(i, 0), n - 2)
        z0, z1 = zg[i], zg[i + 1]
        dz = z1 - z0
        t = (z - z0) / dz
        y0, y1 = self.s_bar[i], self.s_bar[i + 1]
        m0, m1 = self.s_bar_slope[i] * dz, self.s_bar_slope[i + 1] * dz
        t2 = t * t
        t3 = t2 * t
        val = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1
        der = ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1) / dz
        return val, der

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["z", "s_bar", "phi_at_max", "s_bar_slope"])
            for row in zip(self.z_grid, self.s_bar, self.phi_at_max, self.s_bar_slope):
                w.writerow([fmt(v) for v in row])


def fmt(v) -> str:
    return repr(float(v))


def maximizer_curve(model, params, z_lo, z_hi, n=None) -> MaximizerCurve:
    """Tabulate s_bar on [z_lo, z_hi]; a degenerate range gets a small pad."""
    if not (0 < z_lo <= z_hi):
        raise DomainError(f"bad z range [{z_lo}, {z_hi}]")
    pad = max(1e-3, 1e-3 * (z_hi - z_lo))
    lo, hi = max(z_lo - pad, 0.5 * z_lo), z_hi + pad
    if n is None:
        n = max(17, min(401, int(math.ceil((hi - lo) / 0.01)) + 1))
    zs = np.linspace(lo, hi, n)
    sb = tuple(s_bar(model, params, float(z)) for z in zs)
    slopes = tuple(s_bar_slope(model, params, float(z)) for z in zs)
    phis = tuple(phi(model, params, b, float(z)) for b, z in zip(sb, zs))
    return MaximizerCurve(tuple(float(z) for z in zs), sb, phis, slopes)


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------


@dataclass
class AssumptionReport:
    checks: dict = field(default_factory=dict)

    def add(self, name, passed, worst=0.0, detail=""):
        self.checks[name] = {"passed": bool(passed), "worst": float(worst), "detail": detail}

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def failures(self):
        return [k for k, c in self.checks.items() if not c["passed"]]

    def lines(self):
        for name, c in self.checks.items():
            status = "PASS" if c["passed"] else "FAIL"
            extra = f" ({c['detail']})" if c["detail"] else ""
            yield f"{status} {name}: worst={c['worst']:.3e}{extra}"


def check_assumptions(model, params, box, n_samples=64, rtol=1e-12) -> AssumptionReport:
    """Sample the growth and maximizer assumptions over ``box``.

    ``box`` is an :class:`~chemostat_biogas.dynamics.InvariantBox`. Never
    raises; failures are recorded in the report.
    """
    report = AssumptionReport()
    params_ok = all(v > 0 for v in model.parameters.values())
    bad = [k for k, v in model.parameters.items() if not v > 0]
    report.add("parameters_positive", params_ok, 0.0, ", ".join(bad))
    report.add("process_parameters", params.s_in > 0 and params.u_max > 0)
    if not params_ok or not params.s_in > 0:
        return report

    rate = model.rate_function()
    s_in = params.s_in
    n = n_samples
    s = np.linspace(0.0, s_in, n + 1)[1:-1] if n > 2 else np.array([0.5 * s_in])
    z_lo, z_hi = box.z_lo, box.z_hi
    x_hi = s_in * z_hi
    x = np.linspace(x_hi / n, x_hi, n)
    S, X = np.meshgrid(s, x, indexing="ij")
    with np.errstate(all="ignore"):
        M = np.broadcast_to(np.asarray(rate(S, X), dtype=float), S.shape)
        M0 = np.broadcast_to(np.asarray(rate(np.zeros_like(x), x), dtype=float), x.shape)

    worst0 = float(np.max(np.abs(M0)))
    report.add("mu_zero_at_s0", worst0 == 0.0, worst0)
    worst_pos = float(-np.min(M))
    report.add("mu_positive", bool(np.all(M > 0)), max(worst_pos, 0.0))
    scale = max(float(np.max(np.abs(M))), 1e-300)
    inc = float(np.max(np.diff(M, axis=1), initial=0.0))
    report.add("crowding_mu_nonincreasing_in_x", inc <= rtol * scale, max(inc, 0.0))
    MX = M * X
    dec = float(-np.min(np.diff(MX, axis=1), initial=0.0))
    report.add("mu_x_nondecreasing_in_x", dec <= rtol * float(np.max(np.abs(MX))), max(dec, 0.0))

    zs = np.linspace(z_lo, z_hi, max(2, n)) if z_hi > z_lo else np.array([z_lo])
    worst_uni = 0.0
    uni_ok = True
    detail = ""
    for zv in zs:
        try:
            _s_bar_cached(model, float(s_in), float(zv) if model.density_dependent else 1.0)
        except AssumptionError as exc:
            uni_ok = False
            worst_uni = float(zv)
            detail = str(exc)
            break
    report.add("phi_unique_maximizer", uni_ok, worst_uni, detail)

    with np.errstate(all="ignore"):
        P = np.stack([_phi_vec(rate, s_in, s, float(zv)) * np.ones_like(s) for zv in zs], axis=1)
    frame_ok = True
    worst_frame = 0.0
    if P.shape[1] > 1:
        d1 = float(np.max(np.diff(P, axis=1), initial=0.0))
        d2 = float(-np.min(np.diff(P * zs[None, :], axis=1), initial=0.0))
        tol = rtol * float(np.max(np.abs(P * zs[None, :])))
        frame_ok = d1 <= tol and d2 <= tol
        worst_frame = max(d1, d2, 0.0)
    report.add("phi_monotone_framing", frame_ok, worst_frame)
    return report
