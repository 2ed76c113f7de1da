"""Complete-positivity checks: Choi spectrum, unital tetrahedron test, and the closed-form test for general channels."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .canonical import to_canonical
from .channel import IDENTITY2, PAULI, AffineChannel
from .errors import ConsistencyError, InvalidParameterError, NotCompletelyPositiveError

DEFAULT_TOL = 1e-10
RANK_TOL = 1e-9

_SIGMA4 = np.stack([IDENTITY2, *PAULI])
# Pauli coefficients of |i><j|: coefficient k is tr(|i><j| sigma_k) = sigma_k[j, i]
_UNIT_COEFFS = np.array([[[_SIGMA4[k][j, i] for k in range(4)] for j in range(2)] for i in range(2)])

# change of basis that diagonalizes the Choi matrix of a unital diagonal channel
BELL_ROTATION = np.array(
    [[1, 0, 0, 1], [0, 1, 1, 0], [0, -1j, 1j, 0], [1, 0, 0, -1]],
    dtype=complex,
) / math.sqrt(2)


class Verdict(str, enum.Enum):
    CP = "CP"
    NOT_CP = "NotCP"
    BOUNDARY = "Boundary"

    @property
    def is_cp(self) -> bool:
        return self is not Verdict.NOT_CP


def verdict_from_margin(margin: float, tol: float = DEFAULT_TOL) -> Verdict:
    if margin > tol:
        return Verdict.CP
    if margin < -tol:
        return Verdict.NOT_CP
    return Verdict.BOUNDARY


# --- Choi matrix ------------------------------------------------------------


def choi_from_parts(M, t) -> np.ndarray:
    """Trace-2 Choi matrices for stacked ``M (..., 3, 3)`` and ``t (..., 3)``.

    Entry ``[2a + i, 2b + j]`` is ``conj(Phi(|i><j|)[a, b])``; the conjugate
    makes a diagonal channel's matrix read ``(1 + l3 + t3) / 2`` in the corner
    and ``(t1 + i t2) / 2`` at position ``(0, 2)``.
    """
    M = np.asarray(M, dtype=float)
    t = np.asarray(t, dtype=float)
    T = np.zeros(M.shape[:-2] + (4, 4))
    T[..., 0, 0] = 1.0
    T[..., 1:, 0] = t
    T[..., 1:, 1:] = M
    images = np.einsum("...mk,ijk->...ijm", T, _UNIT_COEFFS)
    blocks = 0.5 * np.einsum("...ijm,mab->...aibj", images, _SIGMA4)
    return np.conj(blocks.reshape(M.shape[:-2] + (4, 4)))


def choi(channel: AffineChannel, normalize: bool = False) -> np.ndarray:
    """Choi matrix with trace 2 (or 1 with ``normalize=True``)."""
    C = choi_from_parts(channel.M, channel.t)
    return C / 2 if normalize else C


def choi_rotated(channel: AffineChannel, tol: float = 1e-14) -> np.ndarray:
    """``R C R^dagger`` for a diagonal channel; its diagonal is ``2 q_i``."""
    off = channel.M - np.diag(np.diag(channel.M))
    if np.max(np.abs(off)) > tol:
        raise InvalidParameterError("choi_rotated needs a diagonal M; canonicalize first")
    return BELL_ROTATION @ choi(channel) @ BELL_ROTATION.conj().T


def choi_eigenvalues(channel: AffineChannel) -> np.ndarray:
    return np.linalg.eigvalsh(choi(channel))


def kraus_decomposition(channel: AffineChannel, rank_tol: float = RANK_TOL, tol: float = DEFAULT_TOL) -> list[np.ndarray]:
    """Kraus operators from the Choi eigenvectors, one per eigenvalue above ``rank_tol``."""
    C = np.conj(choi(channel))  # unconjugated convention: C[2a+i, 2b+j] = Phi(|i><j|)[a, b]
    mu, V = np.linalg.eigh(C)
    if mu[0] < -tol:
        raise NotCompletelyPositiveError(mu[0])
    ops = []
    for k in np.argsort(-mu):
        if mu[k] > rank_tol:
            ops.append(math.sqrt(mu[k]) * V[:, k].reshape(2, 2))
    return ops


def apply_kraus(ops, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return sum(A @ rho @ A.conj().T for A in ops)


# --- closed-form quantities ---------------------------------------------------


def q_values(lam) -> np.ndarray:
    """Half the Choi eigenvalues of the unital channel ``diag(lam)``; last axis of size 4."""
    lam = np.asarray(lam, dtype=float)
    l1, l2, l3 = lam[..., 0], lam[..., 1], lam[..., 2]
    return np.stack(
        [1 + l1 + l2 + l3, 1 + l1 - l2 - l3, 1 - l1 + l2 - l3, 1 - l1 - l2 + l3],
        axis=-1,
    ) / 4


def gfa_arrays(lam, t) -> dict:
    """Closed-form CP quantities for diagonal channels, broadcasting over leading axes.

    ``disc`` is ``r**2 - q_prod`` written as a sum of terms that are
    non-negative inside the tetrahedron, which avoids the cancellation of the
    direct difference near ``r**2 = q_prod``. With ``w = u**2`` and
    ``d_k = l_k - l_i l_j``::

        r**2 - q_prod = 4 (sum_k w_k d_k)**2
                        + 64 q0 (w1 w2 (l1-l2)**2 q3 + w1 w3 (l1-l3)**2 q2 + w2 w3 (l2-l3)**2 q1)
    """
    lam = np.asarray(lam, dtype=float)
    t = np.asarray(t, dtype=float)
    lam, t = np.broadcast_arrays(lam, t)
    q = q_values(lam)
    tsq = np.sum(t * t, axis=-1)
    tn = np.sqrt(tsq)
    safe = np.where(tn > 0, tn, 1.0)[..., None]
    w = np.where(tn[..., None] > 0, (t / safe) ** 2, 0.0)
    l1, l2, l3 = lam[..., 0], lam[..., 1], lam[..., 2]
    w1, w2, w3 = w[..., 0], w[..., 1], w[..., 2]
    lsq = np.sum(lam * lam, axis=-1)
    r = 1 - lsq + 2 * np.sum(lam * lam * w, axis=-1)
    q_prod = 256 * np.prod(q, axis=-1)
    d = np.stack([l1 - l2 * l3, l2 - l1 * l3, l3 - l1 * l2], axis=-1)
    disc = 4 * np.sum(w * d, axis=-1) ** 2 + 64 * q[..., 0] * (
        w1 * w2 * (l1 - l2) ** 2 * q[..., 3] + w1 * w3 * (l1 - l3) ** 2 * q[..., 2] + w2 * w3 * (l2 - l3) ** 2 * q[..., 1]
    )
    root = np.sqrt(np.maximum(disc, 0.0))
    bound = r - root
    qmargin = 2 * np.min(q, axis=-1)
    margin = np.where(tn > 0, np.minimum(qmargin, bound - tsq), qmargin)
    return {
        "q": q,
        "tsq": tsq,
        "r": r,
        "q_prod": q_prod,
        "disc": disc,
        "bound": bound,
        "upper": r + root,
        "a": 3 - lsq - tsq,
        "b": 1 - lsq - tsq + 2 * l1 * l2 * l3,
        "detC": (tsq * tsq - 2 * r * tsq + q_prod) / 16,
        "margin": margin,
    }


@dataclass(frozen=True, eq=False)
class CPReport:
    """Closed-form CP quantities for a channel in its diagonal frame.

    ``r`` and ``bound`` are ``None`` for unital channels, where the direction
    ``u = t / |t|`` does not exist. ``margin`` is positive inside the CP set
    and negative outside (for unital channels it equals the smallest Choi
    eigenvalue).
    """

    lam: np.ndarray
    t: np.ndarray
    q: np.ndarray
    r: Optional[float]
    q_prod: float
    bound: Optional[float]
    a: float
    b: float
    detC: float
    choi_eigs: np.ndarray
    verdict: Verdict
    unital: bool
    margin: float
    upper_root_contact: bool = False

    def char_poly(self, x):
        """``x^4 - 2x^3 + (a/2)x^2 - (b/2)x + detC``, whose roots are the Choi eigenvalues."""
        x = np.asarray(x, dtype=float)
        return x**4 - 2 * x**3 + self.a / 2 * x**2 - self.b / 2 * x + self.detC

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam.tolist(),
            "t": self.t.tolist(),
            "q": self.q.tolist(),
            "r": self.r,
            "q_prod": self.q_prod,
            "bound": self.bound,
            "a": self.a,
            "b": self.b,
            "detC": self.detC,
            "choi_eigs": self.choi_eigs.tolist(),
            "verdict": self.verdict.value,
            "unital": self.unital,
            "margin": self.margin,
            "upper_root_contact": self.upper_root_contact,
        }


def _report(lam, t, tol: float, unital: bool) -> CPReport:
    lam = np.asarray(lam, dtype=float)
    t = np.asarray(t, dtype=float)
    g = gfa_arrays(lam, t)
    direct = float(g["r"] ** 2 - g["q_prod"])
    if not unital and abs(direct - float(g["disc"])) > 1e-9 * max(1.0, abs(direct)):
        raise ConsistencyError(f"r^2 - q mismatch: {direct} vs {float(g['disc'])}")
    if not unital and t[0] == 0 and t[1] == 0:
        special = 2 * abs(lam[2] - lam[0] * lam[1])
        if abs(math.sqrt(max(float(g["disc"]), 0.0)) - special) > 1e-9:
            raise ConsistencyError("sqrt(r^2 - q) differs from 2|l3 - l1 l2| with t1 = t2 = 0")
    margin = float(g["margin"])
    upper = bool(not unital and abs(float(g["tsq"]) - float(g["upper"])) <= tol and float(g["disc"]) > tol)
    return CPReport(
        lam=lam,
        t=t,
        q=g["q"],
        r=None if unital else float(g["r"]),
        q_prod=float(g["q_prod"]),
        bound=None if unital else float(g["bound"]),
        a=float(g["a"]),
        b=float(g["b"]),
        detC=float(g["detC"]),
        choi_eigs=choi_eigenvalues(AffineChannel.diagonal(lam, t)),
        verdict=verdict_from_margin(margin, tol),
        unital=unital,
        margin=margin,
        upper_root_contact=upper,
    )


def fac_unital(lam, tol: float = DEFAULT_TOL) -> CPReport:
    """Tetrahedron test for ``diag(lam)``: CP iff every ``q_i >= 0``."""
    return _report(lam, np.zeros(3), tol, unital=True)


def gfa_general(lam, t, tol: float = DEFAULT_TOL) -> CPReport:
    """CP test for the diagonal channel ``(diag(lam), t)``.

    CP iff all ``q_i >= 0`` and ``|t|^2 <= r - sqrt(r^2 - q_prod)``. A
    translation on the upper root ``r + sqrt(r^2 - q_prod)`` is reported as
    not CP and flagged with ``upper_root_contact``.
    """
    t = np.asarray(t, dtype=float)
    if not np.any(t):
        return fac_unital(lam, tol)
    return _report(lam, t, tol, unital=False)


def cp_report(channel: AffineChannel, tol: float = DEFAULT_TOL) -> CPReport:
    """Closed-form report in the canonical frame, cross-checked against the Choi spectrum of ``channel``."""
    c = to_canonical(channel)
    report = gfa_general(c.lam, c.t, tol)
    eigs = choi_eigenvalues(channel)
    eig_verdict = verdict_from_margin(float(eigs[0]), tol)
    opposed = {report.verdict, eig_verdict} == {Verdict.CP, Verdict.NOT_CP}
    if opposed and abs(report.margin) > 10 * tol and abs(eigs[0]) > 10 * tol:
        raise ConsistencyError(
            f"closed form says {report.verdict.value} (margin {report.margin:.3e}) "
            f"but Choi spectrum says {eig_verdict.value} (min eigenvalue {eigs[0]:.3e})"
        )
    return report


def is_cp(channel: AffineChannel, tol: float = DEFAULT_TOL) -> Verdict:
    return cp_report(channel, tol).verdict


def require_cp(channel: AffineChannel, tol: float = DEFAULT_TOL) -> None:
    """Raise :class:`NotCompletelyPositiveError` unless ``channel`` is CP within ``tol``."""
    eigs = choi_eigenvalues(channel)
    if eigs[0] < -tol:
        raise NotCompletelyPositiveError(eigs[0])
