"""Nonlinear optimal velocity model (OVM), equilibria and linearization.

All quantities are SI (m, m/s, s).  The HDV acceleration law has the generic
form ``F(s, s_dot, v)``; linearizing it around a uniform-flow equilibrium
``(s*, v*)`` gives

    d/dt s~ = v~_prev - v~
    d/dt v~ = alpha1 * s~ - alpha2 * v~ + alpha3 * v~_prev

with ``alpha1 = dF/ds``, ``alpha2 = dF/ds_dot - dF/dv`` and
``alpha3 = dF/ds_dot``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol

from scipy.optimize import brentq

from .errors import DegenerateEquilibrium, EquilibriumOutOfRange

#: Equilibrium spacing used when a scenario gives neither s* nor v*.
#: Midpoint of the cosine branch, where V'(s) is largest.
DEFAULT_S_STAR = 20.0


@dataclass(frozen=True)
class DriverParams:
    alpha: float
    beta: float
    v_max: float
    s_st: float
    s_go: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and self.v_max > 0):
            raise ValueError("alpha, beta and v_max must be positive")
        if not 0 < self.s_st < self.s_go:
            raise ValueError("need 0 < s_st < s_go")


@dataclass(frozen=True)
class Equilibrium:
    s_star: float
    v_star: float


@dataclass(frozen=True)
class LinearGains:
    alpha1: float
    alpha2: float
    alpha3: float

    def __post_init__(self):
        if not self.alpha1 > 0:
            raise ValueError("alpha1 must be positive")
        if not self.alpha2 > self.alpha3 > 0:
            raise ValueError("need alpha2 > alpha3 > 0")


# Reference driver used throughout the examples and bundled configs.
REFERENCE_DRIVER = DriverParams(alpha=0.6, beta=0.9, v_max=30.0, s_st=5.0, s_go=35.0)


def desired_velocity(params: DriverParams, s: float) -> float:
    """Spacing-dependent desired velocity V(s), piecewise with a cosine ramp."""
    if s <= params.s_st:
        return 0.0
    if s >= params.s_go:
        return params.v_max
    phase = math.pi * (s - params.s_st) / (params.s_go - params.s_st)
    return 0.5 * params.v_max * (1.0 - math.cos(phase))


def desired_velocity_slope(params: DriverParams, s: float) -> float:
    """dV/ds; zero on both flat branches (and at the joints)."""
    if s <= params.s_st or s >= params.s_go:
        return 0.0
    width = params.s_go - params.s_st
    phase = math.pi * (s - params.s_st) / width
    return 0.5 * params.v_max * math.pi / width * math.sin(phase)


def ovm_acceleration(params: DriverParams, s: float, s_dot: float, v: float) -> float:
    return params.alpha * (desired_velocity(params, s) - v) + params.beta * s_dot


def solve_equilibrium(params: DriverParams, v_star: float) -> Equilibrium:
    """Invert the cosine branch of V for the spacing that sustains ``v_star``.

    Raises EquilibriumOutOfRange unless ``0 < v_star < v_max``; at the ends
    the spacing is not unique.
    """
    if not 0.0 < v_star < params.v_max:
        raise EquilibriumOutOfRange(
            f"v_star={v_star!r} must lie strictly inside (0, {params.v_max!r})"
        )
    cos_phase = 1.0 - 2.0 * v_star / params.v_max
    s_star = params.s_st + (params.s_go - params.s_st) * math.acos(cos_phase) / math.pi
    return Equilibrium(s_star=s_star, v_star=v_star)


def equilibrium_from_spacing(params: DriverParams, s_star: float) -> Equilibrium:
    if s_star < 0:
        raise EquilibriumOutOfRange(f"s_star={s_star!r} is negative")
    return Equilibrium(s_star=s_star, v_star=desired_velocity(params, s_star))


def linearize(params: DriverParams, eq: Equilibrium) -> LinearGains:
    slope = desired_velocity_slope(params, eq.s_star)
    if slope <= 0.0:
        raise DegenerateEquilibrium(
            f"V'(s*) = 0 at s*={eq.s_star!r}; equilibrium must lie in "
            f"({params.s_st!r}, {params.s_go!r})"
        )
    return LinearGains(
        alpha1=params.alpha * slope,
        alpha2=params.alpha + params.beta,
        alpha3=params.beta,
    )


class CarFollowingModel(Protocol):
    """What the rest of the package needs from an HDV model."""

    def acceleration(self, s: float, s_dot: float, v: float) -> float: ...

    def equilibrium(self, v_star: float) -> Equilibrium: ...

    def linearize(self, eq: Equilibrium) -> LinearGains: ...


@dataclass(frozen=True)
class OVM:
    params: DriverParams

    def acceleration(self, s, s_dot, v):
        return ovm_acceleration(self.params, s, s_dot, v)

    def equilibrium(self, v_star):
        return solve_equilibrium(self.params, v_star)

    def linearize(self, eq):
        return linearize(self.params, eq)


def bisect_equilibrium(
    accel: Callable[[float, float, float], float],
    v_star: float,
    s_lo: float,
    s_hi: float,
    xtol: float = 1e-12,
) -> Equilibrium:
    """Equilibrium spacing of a generic model by root bracketing on F(s, 0, v*)."""
    f_lo = accel(s_lo, 0.0, v_star)
    f_hi = accel(s_hi, 0.0, v_star)
    if f_lo * f_hi > 0:
        raise EquilibriumOutOfRange(
            f"F(s, 0, {v_star!r}) does not change sign on [{s_lo!r}, {s_hi!r}]"
        )
    s_star = brentq(lambda s: accel(s, 0.0, v_star), s_lo, s_hi, xtol=xtol)
    return Equilibrium(s_star=s_star, v_star=v_star)


def linearize_numeric(
    accel: Callable[[float, float, float], float],
    eq: Equilibrium,
    rel_step: float = 1e-5,
) -> LinearGains:
    """Central-difference linearization for models without analytic derivatives."""
    h_s = rel_step * max(1.0, abs(eq.s_star))
    h_v = rel_step * max(1.0, abs(eq.v_star))
    s, v = eq.s_star, eq.v_star
    d_s = (accel(s + h_s, 0.0, v) - accel(s - h_s, 0.0, v)) / (2 * h_s)
    d_sdot = (accel(s, h_v, v) - accel(s, -h_v, v)) / (2 * h_v)
    d_v = (accel(s, 0.0, v + h_v) - accel(s, 0.0, v - h_v)) / (2 * h_v)
    return LinearGains(alpha1=d_s, alpha2=d_sdot - d_v, alpha3=d_sdot)
