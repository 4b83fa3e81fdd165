"""Time-domain response of an LCC string to a head-vehicle velocity perturbation."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .car_following import DriverParams, Equilibrium, LinearGains, linearize, ovm_acceleration
from .errors import InvalidTopology, NegativeSpacing, NonFiniteState
from .system_builder import (
    FeedbackGains,
    LccTopology,
    SPACING,
    StateSpace,
    VELOCITY,
    Variant,
    build,
    closed_loop,
    disturbance_column,
)

BLOWUP = 1e9

SINE_PULSE = "sine_pulse"
BRAKE_PULSE = "brake_pulse"
STEP = "step"


@dataclass(frozen=True)
class Perturbation:
    """Head-vehicle velocity deviation.

    sine_pulse: one period of A*sin, speeding up first.
    brake_pulse: a raised-cosine dip of depth A lasting ``duration``.
    step: a sustained drop of A from ``start_time`` on (``duration`` unused).
    """

    kind: str = SINE_PULSE
    amplitude: float = 2.0
    duration: float = 10.0
    start_time: float = 20.0

    def __post_init__(self):
        if self.kind not in (SINE_PULSE, BRAKE_PULSE, STEP):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if not self.duration > 0:
            raise ValueError("duration must be > 0")

    def __call__(self, t: float) -> float:
        tau = t - self.start_time
        if tau < 0:
            return 0.0
        if self.kind == STEP:
            return -self.amplitude
        if tau > self.duration:
            return 0.0
        phase = 2.0 * math.pi * tau / self.duration
        if self.kind == SINE_PULSE:
            return self.amplitude * math.sin(phase)
        return -0.5 * self.amplitude * (1.0 - math.cos(phase))


@dataclass
class SimulationResult:
    times: np.ndarray
    vehicles: list[int]
    head_velocity: np.ndarray
    velocity: np.ndarray  # (len(vehicles), len(times)), absolute m/s
    spacing: np.ndarray  # same shape, absolute m
    metadata: dict = field(default_factory=dict)

    def series(self, vehicle: int):
        j = self.vehicles.index(vehicle)
        return self.velocity[j], self.spacing[j]

    def peak_deviation(self, vehicles=None, v_star=None) -> float:
        """Largest |v_i - v*| over the listed vehicles (default: all)."""
        v_star = self.metadata["v_star"] if v_star is None else v_star
        rows = [self.vehicles.index(v) for v in (vehicles if vehicles is not None else self.vehicles)]
        return float(np.max(np.abs(self.velocity[rows] - v_star)))

    def write_csv(self, path) -> None:
        header = ["time", "v_head"]
        for v in self.vehicles:
            header += [f"v_{v}", f"s_{v}"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k, t in enumerate(self.times):
                row = [f"{t:.10g}", f"{self.head_velocity[k]:.10g}"]
                for j in range(len(self.vehicles)):
                    row += [f"{self.velocity[j, k]:.10g}", f"{self.spacing[j, k]:.10g}"]
                w.writerow(row)


def time_grid(horizon: float, dt: float) -> np.ndarray:
    if not dt > 0 or horizon < dt:
        raise ValueError("need dt > 0 and horizon >= dt")
    steps = int(round(horizon / dt))
    return np.arange(steps + 1) * dt


def rk4_step(f, t, t_next, x):
    """One classical Runge-Kutta step from t to t_next.

    The end stages sample f just inside the interval (right limit at t, left
    limit at t_next), so an input that jumps exactly on a grid point is seen
    as piecewise smooth and the step keeps its full order.
    """
    h = t_next - t
    k1 = f(math.nextafter(t, math.inf), x)
    k2 = f(t + h / 2, x + h / 2 * k1)
    k3 = f(t + h / 2, x + h / 2 * k2)
    k4 = f(math.nextafter(t_next, -math.inf), x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4(f, x0, times):
    """Classical fixed-step Runge-Kutta on the given time grid."""
    x = np.array(x0, dtype=float)
    out = np.empty((len(times), x.size))
    out[0] = x
    for k in range(len(times) - 1):
        x = rk4_step(f, float(times[k]), float(times[k + 1]), x)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP:
            raise NonFiniteState(f"state left |x| <= {BLOWUP:g} at t={times[k + 1]:.6g}")
        out[k + 1] = x
    return out


def integrate_linear(A_cl, E, head_deviation, times):
    """x(t) of dx/dt = A_cl x + E v~_h(t) from x(0) = 0."""
    E = np.asarray(E, dtype=float).ravel()
    return rk4(lambda t, x: A_cl @ x + E * head_deviation(t), np.zeros(A_cl.shape[0]), times)


def _require_head(topology: LccTopology):
    if topology.variant is Variant.FREE_DRIVING:
        raise InvalidTopology("free-driving LCC has no head vehicle to perturb")


def simulate_linear(sys: StateSpace, fb: FeedbackGains, pert: Perturbation,
                    horizon: float = 100.0, dt: float = 0.01,
                    eq: Equilibrium | None = None) -> SimulationResult:
    """Linearized closed-loop response; outputs are absolute (v* + v~, s* + s~)."""
    _require_head(sys.topology)
    times = time_grid(horizon, dt)
    A_cl = closed_loop(sys, fb)
    states = integrate_linear(A_cl, disturbance_column(sys), pert, times)
    s_star = eq.s_star if eq else 0.0
    v_star = eq.v_star if eq else 0.0
    vehicles = sys.topology.vehicles
    vel = np.array([states[:, sys.index(v, VELOCITY)] for v in vehicles]) + v_star
    spc = np.array([states[:, sys.index(v, SPACING)] for v in vehicles]) + s_star
    head = np.array([pert(t) for t in times]) + v_star
    meta = {
        "mode": "linear",
        "variant": sys.topology.variant.value,
        "n": sys.topology.n,
        "m": sys.topology.m,
        "s_star": s_star,
        "v_star": v_star,
        "feedback": fb.to_dict(),
        "perturbation": vars(pert).copy(),
        "dt": dt,
        "horizon": horizon,
    }
    return SimulationResult(times, vehicles, head, vel, spc, meta)


def cav_command(gains: LinearGains, fb: FeedbackGains, topology: LccTopology,
                s_err: dict, v_err: dict, v_pred_err: float) -> float:
    """CAV acceleration from the feedback law, given error states by vehicle."""
    u = gains.alpha1 * s_err[0] - gains.alpha2 * v_err[0] + gains.alpha3 * v_pred_err
    for i, mu in fb.mu.items():
        u += mu * s_err[i]
    for i, k in fb.k.items():
        u += k * v_err[i]
    return u


def simulate_nonlinear(params: DriverParams, topology: LccTopology, fb: FeedbackGains,
                       eq: Equilibrium, pert: Perturbation,
                       horizon: float = 100.0, dt: float = 0.01) -> SimulationResult:
    """Nonlinear OVM drivers around a CAV running the linear feedback law.

    Starts from uniform flow at (s*, v*).  Raises NegativeSpacing on a collision.
    """
    _require_head(topology)
    fb.check(topology)
    gains = linearize(params, eq)
    vehicles = topology.vehicles
    nv = len(vehicles)
    cav = vehicles.index(0)
    times = time_grid(horizon, dt)
    s_star, v_star = eq.s_star, eq.v_star

    # State: [p_head, p_-m..p_n, v_-m..v_n]; head velocity is prescribed.
    def rhs(t, x):
        v_head = v_star + pert(t)
        pos = x[:nv + 1]
        vel = x[nv + 1:]
        lead_v = np.concatenate(([v_head], vel[:-1]))
        spacing = pos[:-1] - pos[1:]
        acc = np.empty(nv)
        for j in range(nv):
            if j == cav:
                s_err = {v: spacing[q] - s_star for q, v in enumerate(vehicles)}
                v_err = {v: vel[q] - v_star for q, v in enumerate(vehicles)}
                acc[j] = cav_command(gains, fb, topology, s_err, v_err, lead_v[j] - v_star)
            else:
                acc[j] = ovm_acceleration(params, spacing[j], lead_v[j] - vel[j], vel[j])
        return np.concatenate(([v_head], vel, acc))

    x0 = np.concatenate(([0.0], -s_star * np.arange(1, nv + 1), np.full(nv, v_star)))
    x = x0.copy()
    out = np.empty((len(times), x.size))
    out[0] = x
    for k in range(len(times) - 1):
        # Stepped here rather than through rk4() so collisions are caught per step.
        x = rk4_step(rhs, float(times[k]), float(times[k + 1]), x)
        if not np.all(np.isfinite(x)):
            raise NonFiniteState(f"non-finite state at t={times[k + 1]:.6g}")
        gaps = x[:nv] - x[1:nv + 1]
        if np.any(gaps < 0):
            j = int(np.argmin(gaps))
            raise NegativeSpacing(
                f"vehicle {vehicles[j]} overlapped its predecessor at t={times[k + 1]:.6g}",
                time=float(times[k + 1]),
                vehicle=vehicles[j],
            )
        out[k + 1] = x
    pos = out[:, :nv + 1].T
    vel = out[:, nv + 1:].T
    head = np.array([v_star + pert(t) for t in times])
    meta = {
        "mode": "nonlinear",
        "variant": topology.variant.value,
        "n": topology.n,
        "m": topology.m,
        "s_star": s_star,
        "v_star": v_star,
        "feedback": fb.to_dict(),
        "perturbation": vars(pert).copy(),
        "dt": dt,
        "horizon": horizon,
    }
    return SimulationResult(times, vehicles, head, vel, pos[:-1] - pos[1:], meta)


def simulate(params: DriverParams, topology: LccTopology, fb: FeedbackGains, eq: Equilibrium,
             pert: Perturbation, horizon: float = 100.0, dt: float = 0.01,
             mode: str = "linear") -> SimulationResult:
    if mode == "nonlinear":
        return simulate_nonlinear(params, topology, fb, eq, pert, horizon, dt)
    sys = build(topology, linearize(params, eq))
    return simulate_linear(sys, fb, pert, horizon, dt, eq)
