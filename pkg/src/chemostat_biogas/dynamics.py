"""Chemostat dynamics in the original (s, x) and reduced (s, z) coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ControlError, DomainError
from .growth import GrowthModel, ProcessParams


@dataclass(frozen=True)
class StateSX:
    s: float
    x: float


@dataclass(frozen=True)
class StateSZ:
    s: float
    z: float


@dataclass(frozen=True)
class InvariantBox:
    s_lo: float
    s_hi: float
    z_lo: float
    z_hi: float

    def violation(self, s, z) -> float:
        """Distance by which (s, z) lies outside the box (0 inside)."""
        return max(self.s_lo - s, s - self.s_hi, self.z_lo - z, z - self.z_hi, 0.0)


def to_sz(params: ProcessParams, state: StateSX) -> StateSZ:
    if state.s >= params.s_in:
        raise DomainError(f"s={state.s} >= s_in={params.s_in}: reduced coordinate is singular")
    if state.s < 0 or not state.x > 0:
        raise DomainError(f"state {state} outside the domain s >= 0, x > 0")
    return StateSZ(state.s, state.x / (params.s_in - state.s))


def to_sx(params: ProcessParams, state: StateSZ) -> StateSX:
    if state.s >= params.s_in:
        raise DomainError(f"s={state.s} >= s_in={params.s_in}: reduced coordinate is singular")
    return StateSX(state.s, state.z * (params.s_in - state.s))


def invariant_box(params: ProcessParams, xi: StateSZ) -> InvariantBox:
    return InvariantBox(0.0, params.s_in, min(xi.z, 1.0), max(xi.z, 1.0))


def _check_u(params, u):
    if not 0.0 <= u <= params.u_max:
        raise ControlError(f"control u={u} outside [0, u_max={params.u_max}]")


def rhs_sx(model: GrowthModel, params: ProcessParams, state: StateSX, u: float):
    """(ds/dt, dx/dt) with unit yield."""
    _check_u(params, u)
    if state.s < 0 or not state.x > 0:
        raise DomainError(f"state {state} outside the domain")
    growth = model.rate_function()(state.s, state.x) * state.x
    return u * (params.s_in - state.s) - growth, growth - u * state.x


def rhs_sz(model: GrowthModel, params: ProcessParams, state: StateSZ, u: float):
    """(ds/dt, dz/dt) in the reduced coordinates."""
    _check_u(params, u)
    s, z = state.s, state.z
    if s >= params.s_in:
        raise DomainError(f"s={s} >= s_in: reduced coordinate is singular")
    if s < 0 or not z > 0:
        raise DomainError(f"state {state} outside the domain")
    w = params.s_in - s
    m = model.rate_function()(s, w * z)
    return (u - m * z) * w, m * (1.0 - z) * z


def singular_rate_max(model, params, box: InvariantBox, n_s=256, n_z=64) -> float:
    """max over ``box`` of mu(s, (s_in - s) z) * z, by grid plus local refinement."""
    from scipy.optimize import minimize

    rate = model.rate_function()
    s_in = params.s_in
    s = np.linspace(0.0, s_in, n_s + 1)[:-1]
    z = np.linspace(box.z_lo, box.z_hi, n_z) if box.z_hi > box.z_lo else np.array([box.z_lo])
    S, Z = np.meshgrid(s, z, indexing="ij")
    with np.errstate(all="ignore"):
        vals = np.broadcast_to(np.asarray(rate(S, (s_in - S) * Z) * Z, dtype=float), S.shape)
    i, j = np.unravel_index(int(np.nanargmax(vals)), vals.shape)
    best = float(vals[i, j])

    def neg(p):
        ss = min(max(p[0], 0.0), s_in * (1 - 1e-12))
        zz = min(max(p[1], box.z_lo), box.z_hi)
        return -float(rate(ss, (s_in - ss) * zz) * zz)

    res = minimize(
        neg,
        x0=[S[i, j], Z[i, j]],
        method="L-BFGS-B",
        bounds=[(0.0, s_in * (1 - 1e-12)), (box.z_lo, box.z_hi)],
    )
    if res.success or np.isfinite(res.fun):
        best = max(best, -float(res.fun))
    return best


def check_controllability(model, params, xi: StateSZ, n_s=256, n_z=64):
    """Whether max over the invariant box of mu*z is below u_max.

    Returns ``(ok, margin)`` with ``margin = u_max - max``.
    """
    box = invariant_box(params, xi)
    peak = singular_rate_max(model, params, box, n_s, n_z)
    margin = params.u_max - peak
    return margin > 0, margin
