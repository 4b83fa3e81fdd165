"""Numeric controllability checks: Kalman rank, PBH test, reachable rows.

The Kalman matrix ``[B, AB, ..., A^(N-1) B]`` has entries growing like
``||A||^(N-1)``.  Columns are normalized before the rank decision, but
identical followers give defective repeated modes and the Krylov columns
still collapse numerically from about N = 8.  The PBH
test only needs one SVD per distinct eigenvalue and stays well conditioned;
prefer it for larger strings.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .car_following import LinearGains
from .errors import EigSolverFailure
from .system_builder import StateSpace, Variant

DEFAULT_TOL = 1e-9
CLUSTER_TOL = 1e-6
# PBH margins between tol*||A|| and MARGINAL_FACTOR*tol*||A|| are "marginal".
MARGINAL_FACTOR = 1e3

CONTROLLABLE = "controllable"
UNCONTROLLABLE = "uncontrollable"
MARGINAL = "marginal"


def fd_condition(gains: LinearGains) -> float:
    """alpha1 - alpha2*alpha3 + alpha3**2; FD-LCC is controllable when nonzero."""
    return gains.alpha1 - gains.alpha2 * gains.alpha3 + gains.alpha3 ** 2


def kalman_matrix(A: np.ndarray, B: np.ndarray, normalize: bool = False) -> np.ndarray:
    """[B, AB, ..., A^(N-1) B].

    With ``normalize`` every block column is scaled to unit norm as it is
    generated.  Column scaling leaves rank and zero rows unchanged and stops
    the ||A||^k growth from swamping the early columns.
    """
    N = A.shape[0]
    cols = [B]
    for _ in range(N - 1):
        nxt = A @ cols[-1]
        if normalize:
            norm = np.linalg.norm(nxt)
            if norm > 0:
                nxt = nxt / norm
        cols.append(nxt)
    if normalize and np.linalg.norm(cols[0]) > 0:
        cols[0] = cols[0] / np.linalg.norm(cols[0])
    return np.hstack(cols)


def kalman_rank(A: np.ndarray, B: np.ndarray, tol: float = DEFAULT_TOL) -> int:
    """Rank of the column-normalized Kalman matrix, thresholded at tol * sigma_max."""
    sv = np.linalg.svd(kalman_matrix(A, B, normalize=True), compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def uncontrollable_rows(A: np.ndarray, B: np.ndarray, tol: float = DEFAULT_TOL) -> list[int]:
    """State indexes whose row of the (column-normalized) Kalman matrix vanishes."""
    C = kalman_matrix(A, B, normalize=True)
    return [i for i in range(A.shape[0]) if np.max(np.abs(C[i])) <= tol]


def cluster_eigenvalues(eigs: np.ndarray, norm_a: float, cluster_tol: float = CLUSTER_TOL) -> list[complex]:
    """Group numerically repeated eigenvalues; return one mean per group.

    A defective eigenvalue of multiplicity k comes back from LAPACK spread over
    a circle of radius about (eps*||A||)^(1/k), far wider than ``cluster_tol``.
    The linkage threshold is widened to the worst case over the matrix size;
    the group mean is accurate to roughly eps*||A|| regardless of the spread.
    """
    N = len(eigs)
    spread = (N * np.finfo(float).eps * max(norm_a, 1.0)) ** (1.0 / max(N, 1))
    thr = max(cluster_tol, spread)
    remaining = list(eigs)
    groups = []
    while remaining:
        group = [remaining.pop(0)]
        grew = True
        while grew:
            grew = False
            for lam in list(remaining):
                if min(abs(lam - g) for g in group) <= thr:
                    group.append(lam)
                    remaining.remove(lam)
                    grew = True
        groups.append(complex(np.mean(group)))
    return sorted(groups, key=lambda z: (round(z.real, 9), round(z.imag, 9)))


@dataclass
class ControllabilityReport:
    kalman_rank: int
    state_dim: int
    pbh_results: list[tuple[complex, float]]
    uncontrollable_state_rows: list[int]
    norm_a: float
    tol: float
    condition_value: float | None = None
    labels: list[str] = field(default_factory=list)

    @property
    def min_margin(self) -> float:
        return min(s for _, s in self.pbh_results) if self.pbh_results else float("inf")

    @property
    def verdict(self) -> str:
        lo = self.tol * max(self.norm_a, 1e-300)
        margin = self.min_margin
        if margin <= lo:
            return UNCONTROLLABLE
        if margin <= MARGINAL_FACTOR * lo:
            return MARGINAL
        return CONTROLLABLE

    @property
    def kalman_full(self) -> bool:
        return self.kalman_rank == self.state_dim

    def to_dict(self) -> dict:
        return {
            "condition_value": self.condition_value,
            "kalman_rank": self.kalman_rank,
            "state_dim": self.state_dim,
            "verdict": self.verdict,
            "norm_A": self.norm_a,
            "tol": self.tol,
            "min_pbh_margin": self.min_margin,
            "pbh_results": [
                {"eigenvalue_re": lam.real, "eigenvalue_im": lam.imag, "sigma_min": s}
                for lam, s in self.pbh_results
            ],
            "uncontrollable_state_rows": self.uncontrollable_state_rows,
            "uncontrollable_state_labels": self.labels,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def pbh_margins(A, B, cluster_tol=CLUSTER_TOL):
    N = A.shape[0]
    try:
        eigs = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigSolverFailure(str(exc)) from exc
    if not np.all(np.isfinite(eigs)):
        raise EigSolverFailure("eigenvalue routine returned non-finite values")
    norm_a = float(np.linalg.norm(A, 2))
    out = []
    eye = np.eye(N)
    for lam in cluster_eigenvalues(eigs, norm_a, cluster_tol):
        M = np.hstack([lam * eye - A, B.astype(complex)])
        out.append((lam, float(np.linalg.svd(M, compute_uv=False)[-1])))
    return out, norm_a


def pbh_test(A: np.ndarray, B: np.ndarray, tol: float = DEFAULT_TOL,
             cluster_tol: float = CLUSTER_TOL) -> ControllabilityReport:
    """PBH test at every distinct eigenvalue, with Kalman data alongside.

    ``verdict`` is controllable when every sigma_min([lam I - A, B]) exceeds
    ``1e3 * tol * ||A||``, uncontrollable when one falls to ``tol * ||A||``,
    marginal in between.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    results, norm_a = pbh_margins(A, B, cluster_tol)
    return ControllabilityReport(
        kalman_rank=kalman_rank(A, B, tol),
        state_dim=A.shape[0],
        pbh_results=results,
        uncontrollable_state_rows=uncontrollable_rows(A, B, tol),
        norm_a=norm_a,
        tol=tol,
    )


def analyze(sys: StateSpace, tol: float = DEFAULT_TOL) -> ControllabilityReport:
    """Controllability report of (A, B) for a built LCC model."""
    report = pbh_test(sys.A, sys.B, tol)
    report.condition_value = fd_condition(sys.gains)
    report.labels = [f"{sys.ordering[i][1]}[{sys.ordering[i][0]}]" for i in report.uncontrollable_state_rows]
    return report


def behind_subsystem(sys: StateSpace):
    """(A22, B2) restricted to the CAV and its followers.

    For the general LCC the preceding block is unreachable and A is block
    lower triangular, so this pair is the controllable part.
    """
    start = 2 * sys.topology.m if sys.topology.variant is Variant.GENERAL else 0
    return sys.A[start:, start:], sys.B[start:]
