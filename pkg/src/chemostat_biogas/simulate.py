"""Closed- and open-loop simulation in (s, z) coordinates.

Fixed-step classical RK4. Switching surfaces of feedback laws are located
inside a step by Brent's method on the step fraction (re-running RK4 over
the partial step), after which the state is placed on the surface and the
law enters its singular mode. Steps never straddle a breakpoint of an
open-loop schedule, a requested checkpoint or the final time.

Reward integrands are carried as extra components of the RK4 state, so the
cumulative rewards have the same order of accuracy as the trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .dynamics import InvariantBox, StateSZ, invariant_box, to_sx
from .errors import DomainError, IntegrationError
from .growth import GrowthModel, ProcessParams


@dataclass(frozen=True)
class SimOptions:
    h: float = 1e-3
    t0: float = 0.0
    T: float = 10.0
    method: str = "rk4"
    slide_band: float | None = None
    atol: float = 1e-9
    rtol: float = 1e-9
    thin: int = 10
    event_xtol: float = 1e-12

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError(f"step h must be positive, got {self.h}")
        if not self.T > self.t0:
            raise DomainError(f"need t0 < T, got t0={self.t0}, T={self.T}")
        if self.method not in ("rk4", "adaptive"):
            raise DomainError(f"unknown integration method {self.method!r}")

    def replace(self, **kw) -> "SimOptions":
        return replace(self, **kw)


@dataclass
class Trajectory:
    """Thinned samples of one simulation plus cumulative reward integrals.

    ``biogas``, ``mu_int`` and ``u_int`` are running integrals of phi(s, z) z,
    mu and u from t0. ``aux[:, k]`` integrates phi(s, aux_z1[k]) and
    ``disc[:, k]`` integrates deltas[k] exp(-deltas[k] (t - t0)) phi(s, z) z.
    """

    model: GrowthModel
    params: ProcessParams
    xi: StateSZ
    times: np.ndarray
    s: np.ndarray
    z: np.ndarray
    u: np.ndarray
    biogas: np.ndarray
    mu_int: np.ndarray
    u_int: np.ndarray
    aux: np.ndarray
    disc: np.ndarray
    aux_z1: tuple = ()
    deltas: tuple = ()
    events: list = field(default_factory=list)
    stopped: bool = False
    max_box_violation: float = 0.0
    max_z_backtrack: float = 0.0
    u_min: float = 0.0
    u_max_seen: float = 0.0
    n_steps: int = 0
    clamp_events: int = 0

    @property
    def box(self) -> InvariantBox:
        return invariant_box(self.params, self.xi)

    @property
    def x(self) -> np.ndarray:
        return self.z * (self.params.s_in - self.s)

    @property
    def t0(self):
        return float(self.times[0])

    @property
    def T(self):
        return float(self.times[-1])

    def index_at(self, t, tol=1e-9) -> int:
        i = int(np.searchsorted(self.times, t - tol))
        if i >= len(self.times) or abs(self.times[i] - t) > tol:
            raise DomainError(f"time {t} is not a recorded sample; pass it as a checkpoint")
        return i

    def phi_z(self) -> np.ndarray:
        rate = self.model.rate_function()
        w = self.params.s_in - self.s
        return rate(self.s, w * self.z) * w * self.z

    def to_csv(self, path):
        from .growth import fmt

        pz = self.phi_z()
        with open(path, "w") as fh:
            fh.write("t,s,z,x,u,phi_z\n")
            for row in zip(self.times, self.s, self.z, self.x, self.u, pz):
                fh.write(",".join(fmt(v) for v in row) + "\n")


def simulate(
    model: GrowthModel,
    params: ProcessParams,
    law,
    xi: StateSZ,
    opts: SimOptions | None = None,
    aux_z1=(),
    deltas=(),
    checkpoints=(),
    stop=None,
) -> Trajectory:
    """Integrate the reduced dynamics from ``xi`` over [opts.t0, opts.T].

    ``checkpoints`` are times that must appear among the samples (e.g. the
    horizons of an average-reward curve). ``stop(s, z)`` is a terminal event
    function: integration ends at its first localized sign change.
    """
    opts = opts or SimOptions()
    if opts.method == "adaptive":
        return _simulate_adaptive(model, params, law, xi, opts, aux_z1, deltas, checkpoints, stop)
    s_in = float(params.s_in)
    s, z = float(xi.s), float(xi.z)
    if not (0.0 <= s < s_in and z > 0):
        raise DomainError(f"initial state {xi} outside the domain [0, s_in) x (0, inf)")
    rate = model.rate_function()
    ctrl = law.control
    switching = law.switching
    box = invariant_box(params, xi)
    z_lo, z_hi = box.z_lo, box.z_hi
    aux_z1 = tuple(float(v) for v in aux_z1)
    deltas = tuple(float(d) for d in deltas)
    for v in aux_z1:
        if not z_lo - 1e-12 <= v <= z_hi + 1e-12:
            raise DomainError(f"z1={v} outside [{z_lo}, {z_hi}]")
    n_aux, n_disc = len(aux_z1), len(deltas)
    extras = n_aux + n_disc > 0
    t0 = float(opts.t0)
    T = float(opts.T)
    h = float(opts.h)

    def rk4(t, y, dt, mode):
        s1, z1 = y[0], y[1]
        hh = 0.5 * dt
        th = t + hh
        # open-loop schedules are constant on a step; sample them mid-step so
        # a step ending on a breakpoint never sees the next value
        # stage 1
        w = s_in - s1
        m1 = rate(s1, w * z1)
        u1 = ctrl(th, s1, z1, mode)
        a1 = (u1 - m1 * z1) * w
        b1 = m1 * (1.0 - z1) * z1
        g1 = m1 * w * z1
        # stage 2
        s2 = s1 + hh * a1
        z2 = z1 + hh * b1
        w = s_in - s2
        m2 = rate(s2, w * z2)
        u2 = ctrl(th, s2, z2, mode)
        a2 = (u2 - m2 * z2) * w
        b2 = m2 * (1.0 - z2) * z2
        g2 = m2 * w * z2
        # stage 3
        s3 = s1 + hh * a2
        z3 = z1 + hh * b2
        w = s_in - s3
        m3 = rate(s3, w * z3)
        u3 = ctrl(th, s3, z3, mode)
        a3 = (u3 - m3 * z3) * w
        b3 = m3 * (1.0 - z3) * z3
        g3 = m3 * w * z3
        # stage 4
        s4 = s1 + dt * a3
        z4 = z1 + dt * b3
        w = s_in - s4
        m4 = rate(s4, w * z4)
        u4 = ctrl(th, s4, z4, mode)
        a4 = (u4 - m4 * z4) * w
        b4 = m4 * (1.0 - z4) * z4
        g4 = m4 * w * z4
        c = dt / 6.0
        out = [
            s1 + c * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            z1 + c * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
            y[2] + c * (g1 + 2.0 * g2 + 2.0 * g3 + g4),
            y[3] + c * (m1 + 2.0 * m2 + 2.0 * m3 + m4),
            y[4] + c * (u1 + 2.0 * u2 + 2.0 * u3 + u4),
        ]
        if extras:
            stages = ((s1, z1, g1, t), (s2, z2, g2, th), (s3, z3, g3, th), (s4, z4, g4, t + dt))
            k = 5
            for zz in aux_z1:
                q = [rate(ss, (s_in - ss) * zz) * (s_in - ss) for ss, _, _, _ in stages]
                out.append(y[k] + c * (q[0] + 2.0 * q[1] + 2.0 * q[2] + q[3]))
                k += 1
            for d in deltas:
                q = [d * math.exp(-d * (tt - t0)) * gg for _, _, gg, tt in stages]
                out.append(y[k] + c * (q[0] + 2.0 * q[1] + 2.0 * q[2] + q[3]))
                k += 1
        return out

    pending = sorted(float(c) for c in checkpoints if t0 < c < T)
    pending.append(T)
    cp_idx = 0

    t = t0
    mode = law.initial_mode(t, s, z)
    y = [s, z, 0.0, 0.0, 0.0] + [0.0] * (n_aux + n_disc)
    rec_t, rec_y, rec_u = [], [], []

    def record(t, y, mode):
        rec_t.append(t)
        rec_y.append(list(y))
        rec_u.append(ctrl(t, y[0], y[1], mode))

    record(t, y, mode)
    events = []
    stopped = False
    max_box = 0.0
    z_back = 0.0
    u_lo, u_hi = math.inf, -math.inf
    thin = max(1, int(opts.thin))
    n_steps = 0
    since = 0
    toward_up = z <= 1.0
    xtol = opts.event_xtol
    g_stop0 = stop(s, z) if stop is not None else None

    while True:
        target = pending[cp_idx]
        mode = law.revise_mode(t, y[0], y[1], mode)
        nb = law.next_breakpoint(t)
        t_end = min(target, nb)
        span = t_end - t
        if span <= 1e-14 * max(1.0, abs(t)):
            t = t_end
            if t_end == target:
                record(t, y, mode)
                since = 0
                cp_idx += 1
                if cp_idx >= len(pending):
                    break
            continue
        reach_end = span <= h
        dt = span if reach_end else h
        g0 = switching(y[0], y[1], mode)
        try:
            y1 = rk4(t, y, dt, mode)
        except (ZeroDivisionError, OverflowError, ValueError) as exc:
            raise IntegrationError(f"integration failed at t={t}: {exc}", StateSZ(y[0], y[1])) from exc
        if not (math.isfinite(y1[0]) and math.isfinite(y1[1])):
            raise IntegrationError(f"non-finite state at t={t + dt}", StateSZ(y[0], y[1]))
        event = None
        if g0 is not None:
            g1 = switching(y1[0], y1[1], mode)
            if (g0 > 0 and g1 <= 0) or (g0 < 0 and g1 >= 0):
                event = "switch"
        if event is None and stop is not None:
            gs1 = stop(y1[0], y1[1])
            if (g_stop0 > 0 and gs1 <= 0) or (g_stop0 < 0 and gs1 >= 0):
                event = "stop"
        if event is not None:
            fn = (lambda a, b: switching(a, b, mode)) if event == "switch" else stop
            y0 = y
            dt_full = dt

            def resid(theta):
                if theta == 0.0:
                    return fn(y0[0], y0[1])
                yy = rk4(t, y0, theta * dt_full, mode)
                return fn(yy[0], yy[1])

            if fn(y1[0], y1[1]) != 0.0:
                theta = brentq(resid, 0.0, 1.0, xtol=xtol, rtol=4 * np.finfo(float).eps)
                dt = theta * dt_full
                y1 = rk4(t, y0, dt, mode)
            t_new = t + dt
        else:
            t_new = t_end if reach_end else t + h
        dz = y1[1] - y[1]
        back = -dz if toward_up else dz
        if back > z_back:
            z_back = back
        viol = max(-y1[0], y1[0] - s_in, z_lo - y1[1], y1[1] - z_hi)
        if viol > max_box:
            max_box = viol
        u_step = ctrl(t + 0.5 * dt, y[0], y[1], mode)
        if u_step < u_lo:
            u_lo = u_step
        if u_step > u_hi:
            u_hi = u_step
        y = y1
        t = t_new
        n_steps += 1
        since += 1
        if event == "switch":
            mode, snapped = law.after_event(y[0], y[1], mode)
            events.append((t, y[0], y[1]))
            y[0] = snapped
            record(t, y, mode)
            since = 0
            continue
        if event == "stop":
            record(t, y, mode)
            stopped = True
            break
        if reach_end and t_end == target:
            record(t, y, mode)
            since = 0
            cp_idx += 1
            if cp_idx >= len(pending):
                break
            continue
        if since >= thin or reach_end:
            record(t, y, mode)
            since = 0

    arr = np.array(rec_y, dtype=float)
    n = len(rec_t)
    traj = Trajectory(
        model=model,
        params=params,
        xi=StateSZ(float(xi.s), float(xi.z)),
        times=np.array(rec_t, dtype=float),
        s=arr[:, 0],
        z=arr[:, 1],
        u=np.array(rec_u, dtype=float),
        biogas=arr[:, 2],
        mu_int=arr[:, 3],
        u_int=arr[:, 4],
        aux=arr[:, 5 : 5 + n_aux].reshape(n, n_aux),
        disc=arr[:, 5 + n_aux :].reshape(n, n_disc),
        aux_z1=aux_z1,
        deltas=deltas,
        events=events,
        stopped=stopped,
        max_box_violation=max_box,
        max_z_backtrack=z_back,
        u_min=u_lo if n_steps else 0.0,
        u_max_seen=u_hi if n_steps else 0.0,
        n_steps=n_steps,
        clamp_events=getattr(law, "clamp_events", 0),
    )
    return traj


def _simulate_adaptive(model, params, law, xi, opts, aux_z1, deltas, checkpoints, stop):
    """Adaptive variant: RK4 step halving until the step-doubling error estimate
    meets atol/rtol, then the fixed-step machinery runs on that step."""
    h = opts.h
    base = opts.replace(method="rk4")
    ref = simulate(model, params, law, xi, base.replace(h=h), aux_z1, deltas, checkpoints, stop)
    for _ in range(12):
        fine = simulate(model, params, law, xi, base.replace(h=h / 2), aux_z1, deltas, checkpoints, stop)
        err = abs(fine.biogas[-1] - ref.biogas[-1]) + abs(fine.s[-1] - ref.s[-1])
        scale = abs(fine.biogas[-1]) + abs(fine.s[-1])
        if err <= opts.atol + opts.rtol * scale:
            return fine
        ref, h = fine, h / 2
    raise IntegrationError("adaptive refinement did not converge", StateSZ(ref.s[-1], ref.z[-1]))


def hitting_time(traj: Trajectory, predicate):
    """First time ``predicate`` holds along the samples.

    ``predicate(s, z)`` may return a boolean or a float; a float ``g`` is read
    as "holds when g <= 0" and the crossing time is linearly interpolated.
    Returns ``None`` when it never holds.
    """
    vals = [predicate(float(a), float(b)) for a, b in zip(traj.s, traj.z)]
    if vals and isinstance(vals[0], (bool, np.bool_)):
        for t, v in zip(traj.times, vals):
            if v:
                return float(t)
        return None
    g = np.asarray(vals, dtype=float)
    hit = np.nonzero(g <= 0)[0]
    if hit.size == 0:
        return None
    i = int(hit[0])
    if i == 0:
        return float(traj.times[0])
    ga, gb = g[i - 1], g[i]
    ta, tb = traj.times[i - 1], traj.times[i]
    return float(ta + (tb - ta) * ga / (ga - gb))


def simulate_schedules(model, params, xi: StateSZ, T, values, h=1e-3, aux_z1=(), t0=0.0):
    """Batch RK4 for open-loop piecewise-constant controls on equal segments.

    ``values`` has shape (n_schedules, n_segments); all schedules share the
    segment grid on [t0, T]. Returns ``(J, J_aux)`` with J the accumulated
    phi(s, z) z per schedule and J_aux[:, k] the accumulated phi(s, aux_z1[k]).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise DomainError("values must be (n_schedules, n_segments)")
    if np.any(values < 0) or np.any(values > params.u_max):
        raise DomainError("schedule values outside [0, u_max]")
    rate = model.rate_function()
    s_in = float(params.s_in)
    n_sched, n_seg = values.shape
    aux_z1 = np.asarray(aux_z1, dtype=float)
    seg_len = (T - t0) / n_seg
    n_sub = max(1, int(math.ceil(seg_len / h - 1e-9)))
    dt = seg_len / n_sub

    def f(s, z, u):
        w = s_in - s
        x = w * z
        m = rate(s, x)
        ds = (u - m * z) * w
        dz = m * (1.0 - z) * z
        g = m * x
        if aux_z1.size:
            ga = rate(s[:, None], w[:, None] * aux_z1[None, :]) * w[:, None]
        else:
            ga = np.zeros((s.shape[0], 0))
        return ds, dz, g, ga

    s = np.full(n_sched, float(xi.s))
    z = np.full(n_sched, float(xi.z))
    J = np.zeros(n_sched)
    Ja = np.zeros((n_sched, aux_z1.size))
    for k in range(n_seg):
        u = values[:, k]
        for _ in range(n_sub):
            a1, b1, c1, d1 = f(s, z, u)
            a2, b2, c2, d2 = f(s + 0.5 * dt * a1, z + 0.5 * dt * b1, u)
            a3, b3, c3, d3 = f(s + 0.5 * dt * a2, z + 0.5 * dt * b2, u)
            a4, b4, c4, d4 = f(s + dt * a3, z + dt * b3, u)
            w = dt / 6.0
            s = s + w * (a1 + 2 * a2 + 2 * a3 + a4)
            z = z + w * (b1 + 2 * b2 + 2 * b3 + b4)
            J = J + w * (c1 + 2 * c2 + 2 * c3 + c4)
            Ja = Ja + w * (d1 + 2 * d2 + 2 * d3 + d4)
    return J, Ja


def state_table(traj: Trajectory):
    """Rows (t, s, z, x) echoing both coordinate systems."""
    out = []
    for t, s, z in zip(traj.times, traj.s, traj.z):
        sx = to_sx(traj.params, StateSZ(float(s), float(z)))
        out.append((float(t), float(s), float(z), sx.x))
    return out
