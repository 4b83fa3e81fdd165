"""Linearized state-space models of LCC strings.

State ordering is front to rear with (spacing error, velocity error)
interleaved per vehicle.  For the general LCC that is

    x = [s~_-m, v~_-m, ..., s~_0, v~_0, ..., s~_n, v~_n]

CF-LCC drops the preceding vehicles.  FD-LCC also drops them and replaces
the CAV's spacing error by its negated position, so that the CAV block reads
like a spacing (d/dt(-p_0) = -v~_0).
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .car_following import LinearGains
from .errors import GainIndexOutOfRange, InvalidTopology

SPACING = "spacing-error"
VELOCITY = "velocity-error"
NEG_POSITION = "negative-position"


class Variant(str, enum.Enum):
    GENERAL = "general"
    CAR_FOLLOWING = "car_following"
    FREE_DRIVING = "free_driving"


@dataclass(frozen=True)
class LccTopology:
    n: int
    m: int = 0
    variant: Variant = Variant.GENERAL

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.n < 0 or self.m < 0:
            raise InvalidTopology(f"n and m must be >= 0, got n={self.n}, m={self.m}")
        if self.variant is Variant.GENERAL and self.m < 1:
            raise InvalidTopology("general LCC needs at least one preceding vehicle (m >= 1)")
        if self.variant is not Variant.GENERAL and self.m != 0:
            raise InvalidTopology(f"{self.variant.value} LCC has no preceding vehicles (m must be 0)")

    @property
    def followers(self) -> list[int]:
        return list(range(1, self.n + 1))

    @property
    def preceding(self) -> list[int]:
        return list(range(-1, -self.m - 1, -1))

    @property
    def vehicles(self) -> list[int]:
        """Vehicle indexes carried in the state, front to rear."""
        return list(range(-self.m, self.n + 1))

    @property
    def state_dim(self) -> int:
        return 2 * (self.n + self.m + 1)

    @property
    def has_head(self) -> bool:
        return self.variant is not Variant.FREE_DRIVING


@dataclass(frozen=True)
class FeedbackGains:
    """Spacing gains ``mu`` and velocity gains ``k`` keyed by vehicle index.

    Missing indexes mean zero gain.
    """

    mu: Mapping[int, float] = field(default_factory=dict)
    k: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "mu", {int(i): float(g) for i, g in dict(self.mu).items()})
        object.__setattr__(self, "k", {int(i): float(g) for i, g in dict(self.k).items()})

    def indices(self) -> set[int]:
        return set(self.mu) | set(self.k)

    def check(self, topology: LccTopology) -> None:
        allowed = set(topology.followers) | set(topology.preceding)
        bad = sorted(self.indices() - allowed)
        if bad:
            raise GainIndexOutOfRange(
                f"feedback gains reference vehicles {bad} outside F u P = {sorted(allowed)}"
            )

    def with_gain(self, vehicle: int, kind: str, value: float) -> "FeedbackGains":
        mu, k = dict(self.mu), dict(self.k)
        {"mu": mu, "k": k}[kind][vehicle] = value
        return FeedbackGains(mu, k)

    def restricted(self, vehicles) -> "FeedbackGains":
        keep = set(vehicles)
        return FeedbackGains(
            {i: g for i, g in self.mu.items() if i in keep},
            {i: g for i, g in self.k.items() if i in keep},
        )

    def to_dict(self) -> dict:
        return {
            "mu": {str(i): self.mu[i] for i in sorted(self.mu)},
            "k": {str(i): self.k[i] for i in sorted(self.k)},
        }


@dataclass(frozen=True, eq=False)
class StateSpace:
    """dx/dt = A x + B u + H v~_h.  ``H`` is None when there is no head vehicle."""

    A: np.ndarray
    B: np.ndarray
    H: np.ndarray | None
    ordering: tuple[tuple[int, str], ...]
    topology: LccTopology
    gains: LinearGains

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def index(self, vehicle: int, kind: str) -> int:
        if kind == SPACING and self.topology.variant is Variant.FREE_DRIVING and vehicle == 0:
            kind = NEG_POSITION
        try:
            return self.ordering.index((vehicle, kind))
        except ValueError:
            raise GainIndexOutOfRange(f"vehicle {vehicle} has no {kind} state") from None

    def to_json(self) -> str:
        payload = {
            "topology": {
                "variant": self.topology.variant.value,
                "n": self.topology.n,
                "m": self.topology.m,
            },
            "gains": {
                "alpha1": self.gains.alpha1,
                "alpha2": self.gains.alpha2,
                "alpha3": self.gains.alpha3,
            },
            "ordering": [[v, kind] for v, kind in self.ordering],
            "A": self.A.tolist(),
            "B": self.B.ravel().tolist(),
            "H": None if self.H is None else self.H.ravel().tolist(),
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "StateSpace":
        d = json.loads(text)
        return cls(
            A=np.array(d["A"], dtype=float),
            B=np.array(d["B"], dtype=float).reshape(-1, 1),
            H=None if d["H"] is None else np.array(d["H"], dtype=float).reshape(-1, 1),
            ordering=tuple((int(v), str(kind)) for v, kind in d["ordering"]),
            topology=LccTopology(**d["topology"]),
            gains=LinearGains(**d["gains"]),
        )


def hdv_blocks(gains: LinearGains):
    """(P1, P2): own-state and predecessor-coupling blocks of one HDV."""
    a1, a2, a3 = gains.alpha1, gains.alpha2, gains.alpha3
    p1 = np.array([[0.0, -1.0], [a1, -a2]])
    p2 = np.array([[0.0, 1.0], [0.0, a3]])
    return p1, p2


S1 = np.array([[0.0, -1.0], [0.0, 0.0]])
S2 = np.array([[0.0, 1.0], [0.0, 0.0]])


def _assemble(topology, gains, diag_blocks, sub_blocks, head_column):
    N = topology.state_dim
    A = np.zeros((N, N))
    for row, blk in enumerate(diag_blocks):
        A[2 * row:2 * row + 2, 2 * row:2 * row + 2] = blk
    for row, blk in enumerate(sub_blocks, start=1):
        A[2 * row:2 * row + 2, 2 * row - 2:2 * row] = blk
    cav = topology.m
    B = np.zeros((N, 1))
    B[2 * cav + 1, 0] = 1.0
    H = None
    if head_column:
        H = np.zeros((N, 1))
        H[0, 0] = 1.0
        H[1, 0] = gains.alpha3
    ordering = []
    for v in topology.vehicles:
        first = NEG_POSITION if (v == 0 and topology.variant is Variant.FREE_DRIVING) else SPACING
        ordering += [(v, first), (v, VELOCITY)]
    return StateSpace(A, B, H, tuple(ordering), topology, gains)


def build_general(topology: LccTopology, gains: LinearGains) -> StateSpace:
    if topology.variant is not Variant.GENERAL or topology.m < 1:
        raise InvalidTopology("build_general needs a general topology with m >= 1")
    p1, p2 = hdv_blocks(gains)
    diag = [S1 if v == 0 else p1 for v in topology.vehicles]
    sub = [S2 if v == 0 else p2 for v in topology.vehicles[1:]]
    return _assemble(topology, gains, diag, sub, head_column=True)


def build_cf_lcc(topology: LccTopology, gains: LinearGains) -> StateSpace:
    if topology.variant is not Variant.CAR_FOLLOWING:
        raise InvalidTopology("build_cf_lcc needs a car_following topology")
    p1, p2 = hdv_blocks(gains)
    diag = [p1] * (topology.n + 1)
    sub = [p2] * topology.n
    return _assemble(topology, gains, diag, sub, head_column=True)


def build_fd_lcc(topology: LccTopology, gains: LinearGains) -> StateSpace:
    if topology.variant is not Variant.FREE_DRIVING:
        raise InvalidTopology("build_fd_lcc needs a free_driving topology")
    p1, p2 = hdv_blocks(gains)
    diag = [S1] + [p1] * topology.n
    sub = [p2] * topology.n
    return _assemble(topology, gains, diag, sub, head_column=False)


def build(topology: LccTopology, gains: LinearGains) -> StateSpace:
    builder = {
        Variant.GENERAL: build_general,
        Variant.CAR_FOLLOWING: build_cf_lcc,
        Variant.FREE_DRIVING: build_fd_lcc,
    }[topology.variant]
    return builder(topology, gains)


def feedback_row(sys: StateSpace, fb: FeedbackGains) -> np.ndarray:
    """Row vector K with u = K x.

    For the general LCC, K carries the CAV's own car-following terms
    (alpha1 s~_0 - alpha2 v~_0 + alpha3 v~_-1) on top of the extra gains, so
    zero extra gains make the CAV behave as an HDV.  CF-LCC already has those
    terms in A_c (the alpha3 v~_h part sits in H), and the FD-LCC CAV is a
    bare double integrator, so there K holds only the extra gains.
    """
    fb.check(sys.topology)
    K = np.zeros((1, sys.dim))
    if sys.topology.variant is Variant.GENERAL:
        g = sys.gains
        K[0, sys.index(0, SPACING)] += g.alpha1
        K[0, sys.index(0, VELOCITY)] -= g.alpha2
        K[0, sys.index(-1, VELOCITY)] += g.alpha3
    for i, mu in fb.mu.items():
        K[0, sys.index(i, SPACING)] += mu
    for i, k in fb.k.items():
        K[0, sys.index(i, VELOCITY)] += k
    return K


def closed_loop(sys: StateSpace, fb: FeedbackGains) -> np.ndarray:
    return sys.A + sys.B @ feedback_row(sys, fb)


def disturbance_column(sys: StateSpace) -> np.ndarray:
    """Column through which v~_h enters the closed loop (zeros without a head)."""
    if sys.H is None:
        return np.zeros((sys.dim, 1))
    return sys.H.copy()
