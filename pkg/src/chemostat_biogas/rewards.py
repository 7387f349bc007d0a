"""Reward functionals, auxiliary value function, sub-optimality frames and a
brute-force oracle over piecewise-constant schedules."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .control import MRAP, ControlLaw, mrap_to_sbar
from .dynamics import StateSZ, invariant_box
from .errors import BudgetError, ConsistencyError, DomainError
from .growth import phi_bar, s_bar
from .parallel import pmap
from .simulate import SimOptions, Trajectory, simulate, simulate_schedules


# ---------------------------------------------------------------------------
# reward kinds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteHorizon:
    """Accumulated production over [t0, T]."""


@dataclass(frozen=True)
class Average:
    T: float


@dataclass(frozen=True)
class Discounted:
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"discount rate must be positive, got {self.delta}")


@dataclass(frozen=True)
class Auxiliary:
    z1: float


def _column(values, keys, wanted, label):
    for k, v in enumerate(keys):
        if abs(v - wanted) <= 1e-12 * max(1.0, abs(wanted)):
            return values[:, k]
    raise DomainError(f"{label}={wanted} was not recorded; pass it to simulate()")


def reward(traj: Trajectory, kind, T=None) -> float:
    """Evaluate a reward on a simulated trajectory, up to ``T`` (default: end)."""
    i = len(traj.times) - 1 if T is None else traj.index_at(T)
    t0 = traj.t0
    if isinstance(kind, FiniteHorizon):
        return float(traj.biogas[i])
    if isinstance(kind, Average):
        i = traj.index_at(t0 + kind.T)
        return float(traj.biogas[i] / kind.T)
    if isinstance(kind, Discounted):
        return float(_column(traj.disc, traj.deltas, kind.delta, "delta")[i])
    if isinstance(kind, Auxiliary):
        box = traj.box
        if not box.z_lo - 1e-12 <= kind.z1 <= box.z_hi + 1e-12:
            raise DomainError(f"z1={kind.z1} outside [{box.z_lo}, {box.z_hi}]")
        return float(_column(traj.aux, traj.aux_z1, kind.z1, "z1")[i])
    raise DomainError(f"unknown reward kind {kind!r}")


def integrand_bound(model, params, xi: StateSZ) -> float:
    """Upper bound on phi(s, z) z over the invariant box."""
    box = invariant_box(params, xi)
    return phi_bar(model, params, box.z_lo) * box.z_hi


def discount_tail(model, params, xi, delta, T, t0=0.0) -> float:
    """Bound on delta * int_T^inf exp(-delta (t - t0)) phi z dt."""
    return math.exp(-delta * (T - t0)) * integrand_bound(model, params, xi)


# ---------------------------------------------------------------------------
# auxiliary problem and frames
# ---------------------------------------------------------------------------


@dataclass
class AuxRun:
    z1: float
    W: float
    J: float
    traj: Trajectory


def auxiliary_run(model, params, xi: StateSZ, z1, t0=0.0, T=1.0, opts=None, checkpoints=()) -> AuxRun:
    """Simulate the most rapid approach to s_bar(z1) and record both rewards.

    The auxiliary reward of this feedback is the auxiliary value W_{z1}.
    """
    opts = (opts or SimOptions()).replace(t0=t0, T=T)
    law = mrap_to_sbar(model, params, z1, opts.slide_band)
    traj = simulate(model, params, law, xi, opts, aux_z1=(z1,), checkpoints=checkpoints)
    return AuxRun(z1, float(traj.aux[-1, 0]), float(traj.biogas[-1]), traj)


def auxiliary_value_W(model, params, xi, z1, t0=0.0, T=1.0, opts=None) -> float:
    return auxiliary_run(model, params, xi, z1, t0, T, opts).W


@dataclass(frozen=True)
class SubOptFrame:
    z1: float
    W: float
    lower: float
    upper: float
    gap_bound: float
    J_feedback: float


def value_frame(model, params, xi: StateSZ, z1, t0=0.0, T=1.0, opts=None, rtol=1e-6) -> SubOptFrame:
    """Two-sided bound on the value function from the auxiliary value.

    Also checks that the auxiliary-optimal feedback lands inside the frame;
    a violation beyond ``rtol`` raises :class:`ConsistencyError`.
    """
    box = invariant_box(params, xi)
    if not box.z_lo - 1e-12 <= z1 <= box.z_hi + 1e-12:
        raise DomainError(f"z1={z1} outside [{box.z_lo}, {box.z_hi}]")
    run = auxiliary_run(model, params, xi, z1, t0, T, opts)
    W = run.W
    lo, hi = box.z_lo * W, box.z_hi * W
    slack = rtol * max(abs(W), 1e-300)
    if not lo - slack <= run.J <= hi + slack:
        raise ConsistencyError(f"J={run.J} outside frame [{lo}, {hi}] for z1={z1}")
    return SubOptFrame(z1, W, lo, hi, abs(1.0 - xi.z) * W, run.J)


# ---------------------------------------------------------------------------
# normalized reward surface
# ---------------------------------------------------------------------------


@dataclass
class RewardSurface:
    T_grid: np.ndarray
    z1_grid: np.ndarray
    J_avg: np.ndarray  # shape (len(T_grid), len(z1_grid))
    J_N: np.ndarray
    degenerate: np.ndarray

    def argmax_z1(self) -> np.ndarray:
        # np.argmax returns the first maximum: ties go to the smaller z1
        return self.z1_grid[np.argmax(self.J_N, axis=1)]

    def rows(self):
        for i, T in enumerate(self.T_grid):
            for j, z1 in enumerate(self.z1_grid):
                yield float(T), float(z1), float(self.J_avg[i, j]), float(self.J_N[i, j])


def _average_curve(model, params, xi, opts, T_grid, z1):
    T_max = float(max(T_grid))
    run = auxiliary_run(model, params, xi, z1, 0.0, T_max, opts, checkpoints=tuple(T_grid))
    return [reward(run.traj, Average(float(T))) for T in T_grid]


def normalize_rows(J):
    J = np.asarray(J, dtype=float)
    lo = J.min(axis=1, keepdims=True)
    hi = J.max(axis=1, keepdims=True)
    span = hi - lo
    degenerate = (span[:, 0] <= 1e-14 * np.maximum(np.abs(hi[:, 0]), 1e-300))
    with np.errstate(invalid="ignore", divide="ignore"):
        JN = np.where(span > 0, (J - lo) / np.where(span > 0, span, 1.0), 0.0)
    JN[degenerate, :] = 0.0
    return JN, degenerate


def normalized_reward_surface(model, params, xi: StateSZ, z1_grid, T_grid, opts=None, jobs=1) -> RewardSurface:
    box = invariant_box(params, xi)
    z1_grid = np.asarray(z1_grid, dtype=float)
    T_grid = np.asarray(T_grid, dtype=float)
    if np.any(z1_grid < box.z_lo - 1e-12) or np.any(z1_grid > box.z_hi + 1e-12):
        raise DomainError(f"z1 grid leaves [{box.z_lo}, {box.z_hi}]")
    if np.any(T_grid <= 0):
        raise DomainError("horizons must be positive")
    opts = opts or SimOptions()
    cols = pmap(partial(_average_curve, model, params, xi, opts, tuple(T_grid)), list(z1_grid), jobs)
    J = np.array(cols, dtype=float).T
    JN, deg = normalize_rows(J)
    return RewardSurface(T_grid, z1_grid, J, JN, deg)


# ---------------------------------------------------------------------------
# infinite-horizon limits
# ---------------------------------------------------------------------------


@dataclass
class AverageLimits:
    T: np.ndarray
    J: np.ndarray
    tail_inf: np.ndarray
    tail_sup: np.ndarray


def average_reward_limits(model, params, xi, law: ControlLaw, T_list, opts=None) -> AverageLimits:
    T_list = np.asarray(sorted(float(t) for t in T_list))
    opts = (opts or SimOptions()).replace(t0=0.0, T=float(T_list[-1]))
    traj = simulate(model, params, law, xi, opts, checkpoints=tuple(T_list))
    J = np.array([reward(traj, Average(float(T))) for T in T_list])
    tail_inf = np.minimum.accumulate(J[::-1])[::-1]
    tail_sup = np.maximum.accumulate(J[::-1])[::-1]
    return AverageLimits(T_list, J, tail_inf, tail_sup)


@dataclass(frozen=True)
class DiscountedValue:
    delta: float
    J: float
    tail_bound: float
    horizon: float


def discounted_limit(model, params, xi, law: ControlLaw, delta_list, opts=None, tail_tol=1e-8):
    """Discounted rewards for each rate, from one simulation.

    The horizon is long enough that the neglected tail is below ``tail_tol``
    relative to the integrand bound for the smallest rate.
    """
    deltas = tuple(float(d) for d in delta_list)
    if any(d <= 0 for d in deltas):
        raise DomainError("discount rates must be positive")
    T = max(math.log(1.0 / tail_tol) / d for d in deltas)
    opts = (opts or SimOptions()).replace(t0=0.0, T=T, thin=1000)
    traj = simulate(model, params, law, xi, opts, deltas=deltas)
    out = []
    for k, d in enumerate(deltas):
        out.append(DiscountedValue(d, float(traj.disc[-1, k]), discount_tail(model, params, xi, d, T), T))
    return out


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------


@dataclass
class BruteForceResult:
    value: float
    schedule: tuple
    aux_z1: tuple = ()
    aux_values: tuple = ()
    aux_schedules: tuple = ()
    n_schedules: int = 0
    all_J: np.ndarray = field(default=None, repr=False)
    all_aux: np.ndarray = field(default=None, repr=False)

    def aux_value(self, z1):
        for k, v in enumerate(self.aux_z1):
            if abs(v - z1) <= 1e-12 * max(1.0, abs(z1)):
                return self.aux_values[k]
        raise DomainError(f"z1={z1} was not evaluated")


MAX_SEGMENTS = 12
MAX_SCHEDULES = 1 << 16


def _bf_chunk(model, params, xi, t0, T, h, aux_z1, values):
    return simulate_schedules(model, params, xi, T, values, h=h, aux_z1=aux_z1, t0=t0)


def brute_force_value(
    model, params, xi: StateSZ, t0=0.0, T=1.0, n_segments=8, levels=None, h=1e-3, aux_z1=(), jobs=1,
) -> BruteForceResult:
    """Exhaustive maximum over piecewise-constant schedules on equal segments.

    Every schedule with values in ``levels`` (default bang-bang {0, u_max})
    is integrated; the best accumulated production is a certified lower
    bound on the value function. Auxiliary rewards for each ``aux_z1`` are
    maximized over the same family.
    """
    if levels is None:
        levels = (0.0, params.u_max)
    levels = tuple(float(v) for v in levels)
    if any(v < 0 or v > params.u_max for v in levels):
        raise DomainError("levels must lie in [0, u_max]")
    if n_segments > MAX_SEGMENTS:
        raise BudgetError(f"{n_segments} segments exceeds the exhaustive limit {MAX_SEGMENTS}")
    count = len(levels) ** n_segments
    if count > MAX_SCHEDULES:
        raise BudgetError(f"{count} schedules exceeds the budget {MAX_SCHEDULES}")
    values = np.array(list(itertools.product(levels, repeat=n_segments)), dtype=float)
    aux_z1 = tuple(float(v) for v in aux_z1)
    chunks = np.array_split(values, max(1, min(int(jobs or 1), len(values))))
    parts = pmap(partial(_bf_chunk, model, params, xi, t0, T, h, aux_z1), chunks, jobs)
    J = np.concatenate([p[0] for p in parts])
    Ja = np.concatenate([p[1] for p in parts]) if aux_z1 else np.zeros((len(values), 0))
    i = int(np.argmax(J))
    aux_idx = [int(np.argmax(Ja[:, k])) for k in range(len(aux_z1))]
    return BruteForceResult(
        value=float(J[i]),
        schedule=tuple(values[i]),
        aux_z1=aux_z1,
        aux_values=tuple(float(Ja[j, k]) for k, j in enumerate(aux_idx)),
        aux_schedules=tuple(tuple(values[j]) for j in aux_idx),
        n_schedules=len(values),
        all_J=J,
        all_aux=Ja,
    )


# ---------------------------------------------------------------------------
# appendix construction: liminf < limsup
# ---------------------------------------------------------------------------


@dataclass
class AppendixAverages:
    N: np.ndarray
    K_sim: np.ndarray
    L_sim: np.ndarray
    K_formula: np.ndarray
    L_formula: np.ndarray
    K_inf: float
    L_inf: float
    gap: float
    t_star: float
    I_star: float
    I_eps: float
    traj: Trajectory = field(default=None, repr=False)


def appendix_formulas(I_star, I_eps, t_star, N):
    """K_N and L_N from the geometric-sum identities."""
    N = np.asarray(N)
    geo = np.array([sum(2.0 ** (-2 * j) for j in range(1, n + 1)) for n in np.atleast_1d(N)])
    K = (I_star + 2 * I_eps) / t_star * geo + I_eps / (2.0 ** (2 * np.atleast_1d(N)) * t_star)
    L = 0.5 * (K + I_star / t_star)
    return K, L


def appendix_averages(model, params, result, N_max=10, full_N=4, opts=None) -> AppendixAverages:
    """Average production of the oscillating schedule at T = 2^(2N) t* and 2^(2N+1) t*.

    The schedule is integrated in full over [0, 2^(2 full_N + 1) t*]. Beyond
    that the production of each further block is extrapolated from the last
    simulated block of the same kind (the dynamics are autonomous and every
    cycle restarts from (eps, 1)).
    """
    law = result.law
    t_star = result.t_star
    full_N = max(1, min(full_N, N_max))
    n_last = 2 * full_N + 1
    marks = [2.0**n * t_star for n in range(0, n_last + 1)]
    opts = (opts or SimOptions()).replace(t0=0.0, T=marks[-1], thin=10**9)
    xi = StateSZ(law.eps, 1.0)
    traj = simulate(model, params, law, xi, opts, checkpoints=tuple(marks))
    prod = {n: float(traj.biogas[traj.index_at(m)]) for n, m in enumerate(marks)}
    # production per unit length of the last simulated hold and cycle blocks
    n_cycle, n_hold = 2 * full_N, 2 * full_N - 1
    cycle_rate = (prod[n_cycle + 1] - prod[n_cycle]) / (2.0**n_cycle * t_star)
    hold_rate = (prod[n_hold + 1] - prod[n_hold]) / (2.0**n_hold * t_star)
    for n in range(n_last + 1, 2 * N_max + 2):
        length = 2.0 ** (n - 1) * t_star
        prev = n - 1
        rate = cycle_rate if prev % 2 == 0 else hold_rate
        prod[n] = prod[n - 1] + rate * length
    Ns = np.arange(1, N_max + 1)
    K_sim = np.array([prod[2 * n] / (2.0 ** (2 * n) * t_star) for n in Ns])
    L_sim = np.array([prod[2 * n + 1] / (2.0 ** (2 * n + 1) * t_star) for n in Ns])
    K_f, L_f = appendix_formulas(result.I_star, result.I_eps, t_star, Ns)
    K_inf = (result.I_star + 2 * result.I_eps) / (3 * t_star)
    L_inf = (2 * result.I_star + result.I_eps) / (3 * t_star)
    return AppendixAverages(
        Ns, K_sim, L_sim, K_f, L_f, K_inf, L_inf, L_inf - K_inf,
        t_star, result.I_star, result.I_eps, traj,
    )
