"""Device behaviour functions.

Three families share this module:

* storage models (``LinearC``, ``LinearL``) carry a single positive constant,
* branch models for resistive elements return the branch current as a
  function of the branch voltage and any control values,
* source models return a value as a function of either time (waveforms) or
  control values (controlled sources).

Every evaluator returns ``(value, gradient)`` so that Newton iterations can be
assembled with exact Jacobians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter

__all__ = [
    "LinearC",
    "LinearL",
    "LinearG",
    "DiodeShockley",
    "SmoothSwitch",
    "PolynomialSource",
    "SmoothMos",
    "TanhSource",
    "WaveformDC",
    "WaveformSin",
    "TableWaveform",
    "format_number",
]


def format_number(x: float) -> str:
    """Shortest round-trippable representation of ``x``."""
    return repr(float(x))


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise InvalidParameter(f"{name} must be positive and finite, got {value!r}")


# -- storage ------------------------------------------------------------------


@dataclass(frozen=True)
class LinearC:
    C: float

    family = "storage"

    def __post_init__(self):
        _positive("capacitance", self.C)

    def to_netlist(self):
        return format_number(self.C)


@dataclass(frozen=True)
class LinearL:
    L: float

    family = "storage"

    def __post_init__(self):
        _positive("inductance", self.L)

    def to_netlist(self):
        return format_number(self.L)


# -- resistive branches -------------------------------------------------------


@dataclass(frozen=True)
class LinearG:
    """Ohmic conductance ``i = G v``."""

    G: float

    family = "branch"
    n_controls = 0

    def __post_init__(self):
        _positive("conductance", self.G)

    def current(self, v, controls=()):
        return self.G * v, np.array([self.G])

    def to_netlist(self):
        r = 1.0 / self.G
        if 1.0 / r == self.G:
            return format_number(r)
        return f"G({format_number(self.G)})"


@dataclass(frozen=True)
class DiodeShockley:
    """Shockley diode ``i = Is (exp(v/Vt) - 1)``.

    Above ``vcrit = 40 Vt`` the exponential is continued linearly (C1), which
    keeps Newton iterates finite without changing the forward-bias range of
    interest.
    """

    Is: float
    Vt: float

    family = "branch"
    n_controls = 0
    _crit = 40.0

    def __post_init__(self):
        _positive("saturation current", self.Is)
        _positive("thermal voltage", self.Vt)

    def current(self, v, controls=()):
        u = v / self.Vt
        if u <= self._crit:
            e = math.exp(u)
            return self.Is * (e - 1.0), np.array([self.Is * e / self.Vt])
        e = math.exp(self._crit)
        return (
            self.Is * (e * (1.0 + u - self._crit) - 1.0),
            np.array([self.Is * e / self.Vt]),
        )

    def conductance(self, v):
        """Conductance-form value ``g_D(v)`` with ``g_D(v) v = i(v)``."""
        if abs(v) < 1e-12 * self.Vt:
            return self.Is / self.Vt
        return self.current(v)[0] / v

    def to_netlist(self):
        return f"D({format_number(self.Is)}, {format_number(self.Vt)})"


@dataclass(frozen=True)
class SmoothSwitch:
    """Voltage controlled conductance with a logistic transition.

    ``g(c) = Goff + (Gon - Goff) / (1 + exp(-k (c - V0)))`` and the branch
    current is ``g(c) v``, ``c`` being the single control voltage.
    """

    Gon: float
    Goff: float
    V0: float
    k: float

    family = "branch"
    n_controls = 1

    def __post_init__(self):
        _positive("Gon", self.Gon)
        _positive("Goff", self.Goff)
        if not math.isfinite(self.V0) or not math.isfinite(self.k):
            raise InvalidParameter("switch threshold and slope must be finite")

    def _sigmoid(self, c):
        z = self.k * (c - self.V0)
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        e = math.exp(z)
        return e / (1.0 + e)

    def conductance(self, c):
        return self.Goff + (self.Gon - self.Goff) * self._sigmoid(c)

    def current(self, v, controls):
        (c,) = controls
        s = self._sigmoid(c)
        g = self.Goff + (self.Gon - self.Goff) * s
        dg = (self.Gon - self.Goff) * self.k * s * (1.0 - s)
        return g * v, np.array([g, dg * v])

    def to_netlist(self):
        args = ", ".join(format_number(a) for a in (self.Gon, self.Goff, self.V0, self.k))
        return f"SW({args})"


# -- controlled source values -------------------------------------------------


@dataclass(frozen=True)
class PolynomialSource:
    """SPICE-style ``POLY`` value.

    With one control the coefficients are those of an ordinary polynomial
    ``c0 + c1 u + c2 u**2 + ...``.  With ``n > 1`` controls the coefficient
    order is constant, the ``n`` linear terms, then the quadratic terms
    ``u1*u1, u1*u2, ..., u1*un, u2*u2, ...``; higher orders are rejected.
    """

    coeffs: tuple

    family = "source"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs:
            raise InvalidParameter("POLY needs at least one coefficient")

    def check_arity(self, n):
        if n == 0:
            raise InvalidParameter("POLY needs at least one control")
        if n > 1 and len(self.coeffs) > 1 + n + n * (n + 1) // 2:
            raise InvalidParameter("multi-control POLY supports at most quadratic terms")

    def value(self, controls):
        u = np.asarray(controls, dtype=float)
        n = len(u)
        c = self.coeffs
        grad = np.zeros(n)
        if n == 1:
            val = 0.0
            for k in range(len(c) - 1, -1, -1):
                val = val * u[0] + c[k]
            d = 0.0
            for k in range(len(c) - 1, 0, -1):
                d = d * u[0] + k * c[k]
            grad[0] = d
            return val, grad
        val = c[0]
        k = 1
        for i in range(n):
            if k < len(c):
                val += c[k] * u[i]
                grad[i] += c[k]
            k += 1
        for i in range(n):
            for j in range(i, n):
                if k < len(c):
                    val += c[k] * u[i] * u[j]
                    grad[i] += c[k] * u[j]
                    grad[j] += c[k] * u[i]
                k += 1
        return val, grad

    def to_netlist(self):
        return "POLY(" + ", ".join(format_number(a) for a in self.coeffs) + ")"


@dataclass(frozen=True)
class SmoothMos:
    """Smooth square-law drain current ``i(vgs, vds[, vbs])``.

    The overdrive uses a softplus of width ``0.02 V`` and the drain
    dependence a ``tanh(5 vds)`` saturation, so the model is C-infinity and
    odd in ``vds``.
    """

    kp: float
    vth: float
    lam: float = 0.0
    gamma: float = 0.0

    family = "source"
    _width = 0.02
    _alpha = 5.0

    def __post_init__(self):
        _positive("kp", self.kp)

    def check_arity(self, n):
        if n not in (2, 3):
            raise InvalidParameter("MOS needs controls (vgs, vds) or (vgs, vds, vbs)")

    def value(self, controls):
        vgs, vds = controls[0], controls[1]
        vbs = controls[2] if len(controls) > 2 else 0.0
        w = self._width
        z = (vgs - self.vth + self.gamma * vbs) / w
        if z > 30:
            vov, dvov = w * z, 1.0
        else:
            ez = math.exp(z)
            vov, dvov = w * math.log1p(ez), ez / (1.0 + ez)
        th = math.tanh(self._alpha * vds)
        dth = self._alpha * (1.0 - th * th)
        lm = 1.0 + self.lam * vds
        a = 0.5 * self.kp * vov * vov
        val = a * th * lm
        di_dvov = self.kp * vov * th * lm
        grad = [di_dvov * dvov, a * (dth * lm + th * self.lam)]
        if len(controls) > 2:
            grad.append(di_dvov * dvov * self.gamma)
        return val, np.array(grad)

    def to_netlist(self):
        args = ", ".join(format_number(a) for a in (self.kp, self.vth, self.lam, self.gamma))
        return f"MOS({args})"


@dataclass(frozen=True)
class TanhSource:
    """Saturating gain ``amp * tanh(gain * u / amp)`` of one control."""

    amp: float
    gain: float

    family = "source"

    def __post_init__(self):
        _positive("amplitude", self.amp)

    def check_arity(self, n):
        if n != 1:
            raise InvalidParameter("TANH takes exactly one control")

    def value(self, controls):
        (u,) = controls
        th = math.tanh(self.gain * u / self.amp)
        return self.amp * th, np.array([self.gain * (1.0 - th * th)])

    def to_netlist(self):
        return f"TANH({format_number(self.amp)}, {format_number(self.gain)})"


# -- time waveforms -----------------------------------------------------------


@dataclass(frozen=True)
class WaveformDC:
    v: float

    family = "waveform"

    def value(self, t):
        return self.v

    def derivative(self, t):
        return 0.0

    def to_netlist(self):
        return f"DC {format_number(self.v)}"


@dataclass(frozen=True)
class WaveformSin:
    """``offset + amp sin(2 pi freq t + phase)``, phase in degrees."""

    offset: float
    amp: float
    freq: float
    phase: float = 0.0

    family = "waveform"

    def _arg(self, t):
        return 2.0 * math.pi * self.freq * t + math.radians(self.phase)

    def value(self, t):
        return self.offset + self.amp * math.sin(self._arg(t))

    def derivative(self, t):
        return self.amp * 2.0 * math.pi * self.freq * math.cos(self._arg(t))

    def to_netlist(self):
        args = ", ".join(format_number(a) for a in (self.offset, self.amp, self.freq, self.phase))
        return f"SIN({args})"


@dataclass(frozen=True)
class TableWaveform:
    """Piecewise-linear waveform, held constant outside the table.

    The derivative is the slope of the segment containing ``t`` (right
    continuous), so it jumps at breakpoints.
    """

    times: tuple
    values: tuple
    _t: np.ndarray = field(init=False, repr=False, compare=False)
    _v: np.ndarray = field(init=False, repr=False, compare=False)

    family = "waveform"

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(x) for x in self.times))
        object.__setattr__(self, "values", tuple(float(x) for x in self.values))
        if len(self.times) == 0 or len(self.times) != len(self.values):
            raise InvalidParameter("TABLE needs matching, non-empty time/value lists")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise InvalidParameter("TABLE times must be strictly increasing")
        object.__setattr__(self, "_t", np.array(self.times))
        object.__setattr__(self, "_v", np.array(self.values))

    def value(self, t):
        return float(np.interp(t, self._t, self._v))

    def derivative(self, t):
        k = int(np.searchsorted(self._t, t, side="right")) - 1
        if k < 0 or k >= len(self._t) - 1:
            return 0.0
        return (self._v[k + 1] - self._v[k]) / (self._t[k + 1] - self._t[k])

    def to_netlist(self):
        pairs = ", ".join(
            f"{format_number(a)}, {format_number(b)}" for a, b in zip(self.times, self.values)
        )
        return f"TABLE({pairs})"
