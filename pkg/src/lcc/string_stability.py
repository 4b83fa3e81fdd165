"""Head-to-tail transfer function and string/plant stability verdicts.

With phi(s) = alpha3*s + alpha1 and gamma(s) = s^2 + alpha2*s + alpha1, each
HDV passes velocity perturbations through phi/gamma.  Under the CAV law

    u = alpha1 s~_0 - alpha2 v~_0 + alpha3 v~_-1 + sum_i (mu_i s~_i + k_i v~_i)

the transfer from head to tail velocity is

    Gamma = (phi + sum_{i in P} H_i r^(i+1)) / (gamma - sum_{i in F} H_i r^i) * r^(n+m)

where r = phi/gamma and H_i = mu_i (gamma/phi - 1) + k_i s.  Preceding
indexes are negative, so vehicle -1 enters with r^0 and vehicle -2 with r^-1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .car_following import LinearGains
from .errors import InvalidTopology, PoleAtEvaluationPoint, PoleOnImaginaryAxis
from .system_builder import (
    FeedbackGains,
    LccTopology,
    StateSpace,
    VELOCITY,
    Variant,
    build,
    closed_loop,
    disturbance_column,
)

STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"

PLANT_EPS = 1e-8
POLE_RTOL = 1e-12


@dataclass(frozen=True)
class OmegaGrid:
    omega_min: float = 1e-3
    omega_max: float = 1e2
    points: int = 1000
    margin: float = 1e-6
    refine_tol: float = 1e-6

    def __post_init__(self):
        if not 0 < self.omega_min < self.omega_max:
            raise ValueError("need 0 < omega_min < omega_max")
        if self.points < 3:
            raise ValueError("omega grid needs at least 3 points")

    def omegas(self) -> np.ndarray:
        return np.logspace(math.log10(self.omega_min), math.log10(self.omega_max), self.points)


@dataclass(frozen=True)
class TransferEval:
    omega: float
    gamma_value: complex

    @property
    def magnitude_sq(self) -> float:
        return abs(self.gamma_value) ** 2


@dataclass(frozen=True)
class StabilityVerdict:
    string_stable: str
    peak_magnitude: float
    peak_omega: float
    plant_stable: str
    max_real_eigenvalue: float

    def to_dict(self) -> dict:
        return {
            "string_stable": self.string_stable,
            "peak_magnitude": self.peak_magnitude,
            "peak_omega": self.peak_omega,
            "plant_stable": self.plant_stable,
            "max_real_eigenvalue": self.max_real_eigenvalue,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def phi_gamma(gains: LinearGains, s):
    """(phi(s), gamma(s)); works elementwise on arrays."""
    phi = gains.alpha3 * s + gains.alpha1
    gamma = s * s + gains.alpha2 * s + gains.alpha1
    return phi, gamma


def _h_term(mu, k, phi, gamma, s):
    return mu * (gamma / phi - 1.0) + k * s


def gamma_head_to_tail(topology: LccTopology, gains: LinearGains, fb: FeedbackGains, s):
    """Gamma(s) at a complex point (or array of points)."""
    if not topology.has_head:
        raise InvalidTopology("free-driving LCC has no head vehicle; Gamma is undefined")
    fb.check(topology)
    s_arr = np.asarray(s, dtype=complex)
    phi, gamma = phi_gamma(gains, s_arr)
    phi_scale = np.abs(gains.alpha3 * s_arr) + gains.alpha1
    if np.any(np.abs(phi) <= POLE_RTOL * phi_scale):
        raise PoleAtEvaluationPoint("phi(s) vanishes at the evaluation point")
    r = phi / gamma
    num = phi.copy()
    den = gamma.copy()
    den_scale = np.abs(gamma)
    for i in topology.preceding:
        mu, k = fb.mu.get(i, 0.0), fb.k.get(i, 0.0)
        if mu or k:
            num = num + _h_term(mu, k, phi, gamma, s_arr) * r ** (i + 1)
    for i in topology.followers:
        mu, k = fb.mu.get(i, 0.0), fb.k.get(i, 0.0)
        if mu or k:
            term = _h_term(mu, k, phi, gamma, s_arr) * r ** i
            den = den - term
            den_scale = den_scale + np.abs(term)
    if np.any(np.abs(den) <= POLE_RTOL * den_scale):
        raise PoleAtEvaluationPoint("Gamma denominator vanishes at the evaluation point")
    out = num / den * r ** (topology.n + topology.m)
    return complex(out) if np.ndim(out) == 0 else out


def _scalar_gamma(topology, gains, fb):
    """Plain-complex Gamma(s) for repeated single-point evaluation."""
    a1, a2, a3 = gains.alpha1, gains.alpha2, gains.alpha3
    ahead = [(i + 1, fb.mu.get(i, 0.0), fb.k.get(i, 0.0)) for i in topology.preceding]
    behind = [(i, fb.mu.get(i, 0.0), fb.k.get(i, 0.0)) for i in topology.followers]
    ahead = [t for t in ahead if t[1] or t[2]]
    behind = [t for t in behind if t[1] or t[2]]
    chain = topology.n + topology.m

    def gamma_at(s: complex) -> complex:
        phi = a3 * s + a1
        gam = s * s + a2 * s + a1
        if abs(phi) <= POLE_RTOL * (abs(a3 * s) + a1):
            raise PoleAtEvaluationPoint("phi(s) vanishes at the evaluation point")
        r = phi / gam
        num = phi
        for p, mu, k in ahead:
            num += (mu * (gam / phi - 1.0) + k * s) * r ** p
        den = gam
        scale = abs(gam)
        for p, mu, k in behind:
            term = (mu * (gam / phi - 1.0) + k * s) * r ** p
            den -= term
            scale += abs(term)
        if abs(den) <= POLE_RTOL * scale:
            raise PoleAtEvaluationPoint("Gamma denominator vanishes at the evaluation point")
        return num / den * r ** chain

    return gamma_at


def evaluate(topology, gains, fb, omega) -> TransferEval:
    return TransferEval(float(omega), gamma_head_to_tail(topology, gains, fb, 1j * omega))


def frequency_response(sys: StateSpace, fb: FeedbackGains, omega):
    """v~_n / v~_h from the closed-loop realization, C (jw I - A_cl)^-1 E.

    Independent of the closed-form Gamma; used to cross-check it.
    """
    A_cl = closed_loop(sys, fb)
    E = disturbance_column(sys)[:, 0]
    out_row = sys.index(sys.topology.n, VELOCITY)
    eye = np.eye(sys.dim)
    omegas = np.atleast_1d(np.asarray(omega, dtype=float))
    vals = np.array([np.linalg.solve(1j * w * eye - A_cl, E)[out_row] for w in omegas])
    return vals if np.ndim(omega) else complex(vals[0])


def _golden_max(f, a, b, tol):
    """Maximize a unimodal f on [a, b] by golden-section search."""
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def magnitude_peak(topology, gains, fb, grid: OmegaGrid = OmegaGrid()):
    """(peak |Gamma|, omega at peak, peak-at-left-edge flag).

    Every interior local maximum of |Gamma|^2 on the log grid is refined by
    golden section in log(omega) to ``grid.refine_tol``.
    """
    omegas = grid.omegas()
    try:
        mag2 = np.abs(gamma_head_to_tail(topology, gains, fb, 1j * omegas)) ** 2
    except PoleAtEvaluationPoint as exc:
        raise PoleOnImaginaryAxis(str(exc)) from exc
    logw = np.log(omegas)

    gamma_at = _scalar_gamma(topology, gains, fb)

    def f(lw):
        return abs(gamma_at(1j * math.exp(lw))) ** 2

    best_val = mag2[0]
    best_w = omegas[0]
    at_edge = True
    if mag2[-1] > best_val:
        best_val, best_w, at_edge = mag2[-1], omegas[-1], False
    interior = np.nonzero((mag2[1:-1] >= mag2[:-2]) & (mag2[1:-1] > mag2[2:]))[0] + 1
    for idx in interior:
        try:
            lw, val = _golden_max(f, logw[idx - 1], logw[idx + 1], grid.refine_tol)
        except PoleAtEvaluationPoint as exc:
            raise PoleOnImaginaryAxis(str(exc)) from exc
        val = max(val, mag2[idx])
        if val > best_val:
            best_val, best_w, at_edge = val, math.exp(lw), False
    return math.sqrt(best_val), float(best_w), at_edge


def classify_peak(peak: float, at_edge: bool, margin: float) -> str:
    # Gamma -> 1 as omega -> 0, so a maximum sitting on the lowest grid
    # frequency is judged by which side of 1 it lies on, not by the band.
    if at_edge:
        if peak > 1.0 + 1e-14:
            return UNSTABLE
        if peak < 1.0 - 1e-14:
            return STABLE
        return MARGINAL
    if peak < 1.0 - margin:
        return STABLE
    if peak > 1.0 + margin:
        return UNSTABLE
    return MARGINAL


def plant_stability(sys: StateSpace, fb: FeedbackGains, eps: float = PLANT_EPS):
    """(verdict, max real part) of the closed-loop spectrum.

    FD-LCC: the CAV position never feeds back, so its zero eigenvalue is
    dropped.  The velocity-shift mode (all vehicles faster by the same amount,
    spacings adjusted to match) is dropped too when the follower gains leave
    it at zero, as they do when all gains are zero.
    """
    A_cl = closed_loop(sys, fb)
    if sys.topology.variant is Variant.FREE_DRIVING:
        A_red = A_cl[1:, 1:]
        eigs = np.linalg.eigvals(A_red)
        g = sys.gains
        shift = np.ones(A_red.shape[0])
        shift[1::2] = (g.alpha2 - g.alpha3) / g.alpha1
        if np.linalg.norm(A_red @ shift) <= 1e-12 * max(1.0, np.linalg.norm(A_red)) * np.linalg.norm(shift):
            eigs = np.delete(eigs, np.argmin(np.abs(eigs)))
    else:
        eigs = np.linalg.eigvals(A_cl)
    max_re = float(np.max(eigs.real)) if eigs.size else -math.inf
    if max_re < -eps:
        return STABLE, max_re
    if max_re > eps:
        return UNSTABLE, max_re
    return MARGINAL, max_re


def string_stability_verdict(topology: LccTopology, gains: LinearGains, fb: FeedbackGains,
                             grid: OmegaGrid = OmegaGrid()) -> StabilityVerdict:
    sys = build(topology, gains)
    plant, max_re = plant_stability(sys, fb)
    peak, w_peak, at_edge = magnitude_peak(topology, gains, fb, grid)
    return StabilityVerdict(classify_peak(peak, at_edge, grid.margin), peak, w_peak, plant, max_re)


def magnitude_curve(topology, gains, fb, grid: OmegaGrid = OmegaGrid()):
    """(omegas, |Gamma|^2) on the grid, for CSV output and plotting."""
    omegas = grid.omegas()
    mag2 = np.abs(gamma_head_to_tail(topology, gains, fb, 1j * omegas)) ** 2
    return omegas, mag2


def hdv_peak(gains: LinearGains, grid: OmegaGrid = OmegaGrid()):
    """Peak of the single-HDV magnitude |phi/gamma| (local string stability)."""
    topo = LccTopology(n=0, m=0, variant=Variant.CAR_FOLLOWING)
    peak, w, _ = magnitude_peak(topo, gains, FeedbackGains(), grid)
    return peak, w
