"""Control laws: constant, piecewise-constant, most rapid approach feedbacks
and the oscillating schedule whose average reward has liminf < limsup.

Feedback laws carry a discrete *mode* chosen by the simulator:

``"up"``    s below the target, u = u_max
``"down"``  s above the target, u = 0
``"sing"``  on the target (within the sliding band), singular control

A mode change happens only at a localized zero of :meth:`switching`, or when
the singular control saturates (:meth:`revise_mode`).
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field

from .dynamics import StateSZ, check_controllability
from .errors import ConfigError, ControlError, DomainError
from .growth import GrowthModel, MaximizerCurve, ProcessParams, maximizer_curve, phi, s_bar

log = logging.getLogger(__name__)

INF = math.inf


def saturate(u: float, params: ProcessParams) -> float:
    return min(max(u, 0.0), params.u_max)


class ControlLaw:
    """Base class. Open-loop laws ignore the state and the mode."""

    name = "law"
    feedback = False

    def initial_mode(self, t, s, z):
        return None

    def control(self, t, s, z, mode):
        raise NotImplementedError

    def switching(self, s, z, mode):
        """Event function for the current mode; ``None`` when no event is armed."""
        return None

    def after_event(self, s, z, mode):
        """Return ``(new_mode, s)`` after a localized switching event."""
        return mode, s

    def revise_mode(self, t, s, z, mode):
        return mode

    def next_breakpoint(self, t):
        """First discontinuity of an open-loop schedule strictly after ``t``."""
        return INF

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass
class Constant(ControlLaw):
    u0: float
    params: ProcessParams
    name: str = "constant"

    def __post_init__(self):
        if not 0.0 <= self.u0 <= self.params.u_max:
            raise ControlError(f"constant control {self.u0} outside [0, {self.params.u_max}]")

    def control(self, t, s, z, mode):
        return self.u0

    def to_dict(self):
        return {"type": "constant", "u": self.u0}


@dataclass
class PiecewiseConstant(ControlLaw):
    """``values[k]`` applies on ``[breakpoints[k-1], breakpoints[k])``.

    ``breakpoints`` holds the interior switching times, so there is one more
    value than breakpoints.
    """

    breakpoints: tuple
    values: tuple
    params: ProcessParams
    name: str = "piecewise"

    def __post_init__(self):
        self.breakpoints = tuple(float(b) for b in self.breakpoints)
        self.values = tuple(float(v) for v in self.values)
        if len(self.values) != len(self.breakpoints) + 1:
            raise ConfigError("piecewise control needs len(values) == len(breakpoints) + 1")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ConfigError("piecewise control breakpoints must be strictly increasing")
        for v in self.values:
            if not 0.0 <= v <= self.params.u_max:
                raise ControlError(f"piecewise control value {v} outside [0, {self.params.u_max}]")

    def control(self, t, s, z, mode):
        return self.values[bisect.bisect_right(self.breakpoints, t)]

    def next_breakpoint(self, t):
        i = bisect.bisect_right(self.breakpoints, t)
        return self.breakpoints[i] if i < len(self.breakpoints) else INF

    def to_dict(self):
        return {"type": "piecewise", "breakpoints": list(self.breakpoints), "values": list(self.values)}


class _Approach(ControlLaw):
    feedback = True

    def __init__(self, model, params, band):
        self.model = model
        self.params = params
        self.band = 1e-6 * params.s_in if band is None else band
        self.rate = model.rate_function()
        self.s_in = params.s_in
        self.u_max = params.u_max
        self.clamp_events = 0

    def target(self, z):
        raise NotImplementedError

    def initial_mode(self, t, s, z):
        g = s - self.target(z)
        if abs(g) <= self.band:
            return "sing"
        return "down" if g > 0 else "up"

    def switching(self, s, z, mode):
        if mode == "sing":
            return None
        return s - self.target(z)

    def control(self, t, s, z, mode):
        if mode == "up":
            return self.u_max
        if mode == "down":
            return 0.0
        return self.singular(s, z)


class MRAP(_Approach):
    """Most rapid approach to a fixed substrate level ``s_star``."""

    name = "mrap"

    def __init__(self, model: GrowthModel, params: ProcessParams, s_star: float, band=None):
        if not 0.0 <= s_star < params.s_in:
            raise DomainError(f"s_star={s_star} outside [0, s_in)")
        super().__init__(model, params, band)
        self.s_star = float(s_star)
        self._x_scale = params.s_in - self.s_star

    def target(self, z):
        return self.s_star

    def singular(self, s, z):
        u = self.rate(self.s_star, self._x_scale * z) * z
        if u > self.u_max * (1 + 1e-12):
            raise ControlError(
                f"singular control {u:.6g} exceeds u_max={self.u_max} at z={z:.6g}: "
                "controllability assumption violated"
            )
        return u

    def after_event(self, s, z, mode):
        return "sing", self.s_star

    def to_dict(self):
        return {"type": "mrap", "s_star": self.s_star}


class MRAPCurve(_Approach):
    """Most rapid approach to the maximizer curve s = s_bar(z)."""

    name = "mrap_curve"

    def __init__(self, model, params, curve: MaximizerCurve, band=None):
        super().__init__(model, params, band)
        self.curve = curve

    def target(self, z):
        return self.curve.evaluate(z)[0]

    def _raw_singular(self, s, z):
        w = self.s_in - s
        m = self.rate(s, w * z)
        slope = self.curve.evaluate(z)[1]
        return m * z + slope * m * (1.0 - z) * z / w

    def singular(self, s, z):
        u = self._raw_singular(s, z)
        if u < 0.0:
            return 0.0
        if u > self.u_max:
            return self.u_max
        return u

    def revise_mode(self, t, s, z, mode):
        if mode != "sing":
            return mode
        u = self._raw_singular(s, z)
        if u > self.u_max:
            self.clamp_events += 1
            log.debug("curve-tracking control saturated high at t=%g", t)
            return "up"
        if u < 0.0:
            self.clamp_events += 1
            log.debug("curve-tracking control saturated low at t=%g", t)
            return "down"
        return mode

    def after_event(self, s, z, mode):
        return "sing", self.target(z)

    def to_dict(self):
        return {"type": "mrap_curve"}


@dataclass
class AppendixSchedule(ControlLaw):
    """Time-indexed oscillating schedule on the manifold z = 1.

    [0, t*]: hold s = eps. On (2^(2k) t*, 2^(2k+1) t*] repeat the excursion
    cycle (u_max for ``t_up``, then 0) 2^(2k) times; on
    (2^(2k+1) t*, 2^(2k+2) t*] hold again. Evaluated per query, nothing is
    materialized.
    """

    eps: float
    s_star: float
    t_star: float
    t_up: float
    u_hold: float
    u_max: float
    name: str = "appendix"

    def block(self, t):
        """Index n with t in (2^n t*, 2^(n+1) t*], or -1 on [0, t*]."""
        r = t / self.t_star
        if r <= 1.0:
            return -1
        n = math.frexp(r)[1] - 1
        if r == 2.0**n:
            n -= 1
        return n

    def control(self, t, s, z, mode):
        n = self.block(t)
        if n < 0 or n % 2 == 1:
            return self.u_hold
        start = 2.0**n * self.t_star
        phase = math.fmod(t - start, self.t_star)
        return self.u_max if phase < self.t_up else 0.0

    def next_breakpoint(self, t):
        tt = t + 1e-12 * max(t, self.t_star)
        n = self.block(tt)
        end = 2.0 ** (n + 1) * self.t_star
        if n < 0 or n % 2 == 1:
            return end
        start = 2.0**n * self.t_star
        j = math.floor((tt - start) / self.t_star)
        cand = start + j * self.t_star + self.t_up
        if cand > tt:
            return min(cand, end)
        return min(start + (j + 1) * self.t_star, end)

    def to_dict(self):
        return {"type": "appendix", "eps": self.eps, "s_star": self.s_star}


@dataclass
class AppendixResult:
    law: AppendixSchedule
    t_star: float
    I_star: float
    I_eps: float
    t_up: float
    t_down: float
    extra: dict = field(default_factory=dict)


def appendix_schedule(model, params, eps, s_star, opts=None) -> AppendixResult:
    """Build the oscillating schedule from simulated excursion data.

    The excursion from (eps, 1) to s_star under u_max and back under u = 0 is
    integrated with localized stop events, giving its duration t* and
    production I*. I_eps = t* phi(eps, 1) is the production of holding.
    """
    from .simulate import SimOptions, simulate

    if not 0 < eps < s_star < params.s_in:
        raise DomainError(f"need 0 < eps < s_star < s_in, got eps={eps}, s_star={s_star}")
    ok, margin = check_controllability(model, params, StateSZ(eps, 1.0))
    if not ok:
        raise ControlError(f"s_star unreachable from (eps, 1): controllability margin {margin:.4g} <= 0")
    opts = opts or SimOptions()
    horizon = 1e6
    up = simulate(
        model, params, Constant(params.u_max, params), StateSZ(eps, 1.0),
        opts.replace(t0=0.0, T=horizon, thin=10**9), stop=lambda s, z: s - s_star,
    )
    if not up.stopped:
        raise ControlError("s_star not reached under u_max")
    down = simulate(
        model, params, Constant(0.0, params), StateSZ(s_star, 1.0),
        opts.replace(t0=0.0, T=horizon, thin=10**9), stop=lambda s, z: s - eps,
    )
    if not down.stopped:
        raise ControlError("eps not reached under u = 0")
    t_up, t_down = up.times[-1], down.times[-1]
    t_star = t_up + t_down
    I_star = up.biogas[-1] + down.biogas[-1]
    u_hold = model.rate_function()(eps, params.s_in - eps)
    I_eps = t_star * phi(model, params, eps, 1.0)
    law = AppendixSchedule(eps, s_star, t_star, t_up, u_hold, params.u_max)
    return AppendixResult(law, t_star, I_star, I_eps, t_up, t_down)


# ---------------------------------------------------------------------------
# construction from config
# ---------------------------------------------------------------------------


def mrap_to_sbar(model, params, z1, band=None) -> MRAP:
    return MRAP(model, params, s_bar(model, params, z1), band)


def curve_law(model, params, xi: StateSZ, band=None) -> MRAPCurve:
    lo, hi = min(xi.z, 1.0), max(xi.z, 1.0)
    return MRAPCurve(model, params, maximizer_curve(model, params, lo, hi), band)


def law_from_dict(spec: dict, model, params, xi: StateSZ, band=None) -> ControlLaw:
    """Build a law from a config entry.

    Recognized ``type`` values: constant (u), piecewise (breakpoints, values),
    mrap (s_star | z1 | "z0"/"z1=1"), sbar (z1: number, "z0", or "mid"),
    mrap_curve.
    """
    kind = str(spec.get("type", "")).lower()
    try:
        if kind == "constant":
            return Constant(float(spec["u"]), params)
        if kind == "piecewise":
            return PiecewiseConstant(tuple(spec["breakpoints"]), tuple(spec["values"]), params)
        if kind == "mrap":
            return MRAP(model, params, float(spec["s_star"]), band)
        if kind == "sbar":
            z1 = resolve_z1(spec.get("z1", 1.0), xi)
            return mrap_to_sbar(model, params, z1, band)
        if kind == "mrap_curve":
            return curve_law(model, params, xi, band)
    except KeyError as exc:
        raise ConfigError(f"laws.{kind}: missing key {exc.args[0]!r}") from None
    raise ConfigError(f"laws.type: unknown control law {kind!r}")


def resolve_z1(value, xi: StateSZ) -> float:
    if isinstance(value, str):
        key = value.lower()
        if key == "z0":
            return xi.z
        if key == "mid":
            return 0.5 * (xi.z + 1.0)
        try:
            return float(key)
        except ValueError:
            raise ConfigError(f"laws.z1: cannot interpret {value!r}") from None
    return float(value)
