"""Signed singular value normal form ``M = R1 diag(lambda) R2`` with ``R1, R2 in SO(3)``."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .channel import AffineChannel, SignFlip, Unitary
from .errors import ClassificationError, InvalidParameterError

DEGENERACY_TOL = 1e-12
ZERO_TOL = 1e-13

Ordering = Union[str, Sequence[int]]


@dataclass(frozen=True, eq=False)
class CanonicalChannel:
    """Diagonal channel ``(lam, t)`` plus the rotations that conjugate it back.

    The original channel is ``post_rotation @ diag(lam) @ pre_rotation`` with
    translation ``post_rotation @ t``.
    """

    lam: np.ndarray
    t: np.ndarray
    post_rotation: np.ndarray
    pre_rotation: np.ndarray

    def diagonal_channel(self) -> AffineChannel:
        return AffineChannel.diagonal(self.lam, self.t)

    def recompose(self) -> AffineChannel:
        return AffineChannel(self.post_rotation @ np.diag(self.lam) @ self.pre_rotation, self.post_rotation @ self.t)

    def to_dict(self) -> dict:
        ch = self.recompose()
        return {
            "M": ch.M.tolist(),
            "t": ch.t.tolist(),
            "lambda": self.lam.tolist(),
            "t_canonical": self.t.tolist(),
            "R1": self.post_rotation.tolist(),
            "R2": self.pre_rotation.tolist(),
        }


def _blocks(values: np.ndarray, tol: float) -> list[list[int]]:
    """Group consecutive (sorted) entries that agree within ``tol``."""
    groups: list[list[int]] = [[0]]
    for i in range(1, len(values)):
        if abs(values[i] - values[groups[-1][0]]) <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _max_trace_orthogonal(A: np.ndarray) -> np.ndarray:
    """Orthogonal ``P`` maximizing ``trace(P @ A)`` (Procrustes)."""
    W, _, Zt = np.linalg.svd(A)
    return Zt.T @ W.T


def signed_svd(M, tol: float = DEGENERACY_TOL) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Factor ``M = R1 @ diag(lam) @ R2`` with proper rotations ``R1, R2``.

    ``|lam|`` is sorted descending. When exactly one SVD factor is improper,
    the sign goes onto the smallest singular value, so ``prod(lam)`` has the
    sign of ``det M``. Remaining freedom (degenerate singular values, joint
    column signs) is fixed by maximizing ``trace(R2)`` and then ``trace(R1)``.
    """
    M = np.asarray(M, dtype=float)
    U, S, Vt = np.linalg.svd(M)
    scale = max(1.0, float(S[0]))
    for b in _blocks(S, tol * scale):
        if len(b) == 1:
            continue
        ix = np.ix_(b, b)
        if S[b[0]] <= ZERO_TOL * scale:
            # null space: left and right bases are independent
            P = _max_trace_orthogonal(Vt[ix])
            Vt[b, :] = P @ Vt[b, :]
            Q = _max_trace_orthogonal(U[ix].T).T
            U[:, b] = U[:, b] @ Q
        else:
            P = _max_trace_orthogonal(Vt[ix])
            Vt[b, :] = P @ Vt[b, :]
            U[:, b] = U[:, b] @ P.T

    best = None
    for signs in itertools.product((1.0, -1.0), repeat=3):
        s = np.array(signs)
        U2, Vt2, lam = U * s, s[:, None] * Vt, S.copy()
        dU, dV = np.linalg.det(U2), np.linalg.det(Vt2)
        if dU < 0 and dV < 0:
            continue
        if dU < 0:
            U2[:, 2] *= -1
            lam[2] = -lam[2] if lam[2] != 0 else 0.0
        elif dV < 0:
            Vt2[2, :] *= -1
            lam[2] = -lam[2] if lam[2] != 0 else 0.0
        score = (round(float(np.trace(Vt2)), 12), round(float(np.trace(U2)), 12))
        if best is None or score > best[0]:
            best = (score, U2, lam, Vt2)
    _, R1, lam, R2 = best
    return R1, lam, R2


def _complete_basis_with_last(w: np.ndarray) -> np.ndarray:
    """Proper rotation (k x k) whose last column is ``w / |w|``."""
    k = len(w)
    A = np.column_stack([w] + [np.eye(k)[:, i] for i in range(k)])
    Q, _ = np.linalg.qr(A)
    Q = Q[:, :k]
    if Q[:, 0] @ w < 0:
        Q[:, 0] *= -1
    Q = np.column_stack([Q[:, 1:], Q[:, 0]])
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q


def _signed_permutation(perm: Sequence[int]) -> np.ndarray:
    """Rotation ``P`` with ``(P @ x)[i] = ±x[perm[i]]``; the sign is only used to keep ``det P = +1``."""
    P = np.zeros((3, 3))
    for i, p in enumerate(perm):
        P[i, p] = 1.0
    if np.linalg.det(P) < 0:
        P[0] *= -1
    return P


def extremal_residual(lam: np.ndarray, t: np.ndarray) -> float:
    """How far ``(lam, t)`` (last axis distinguished) is from the extremal identities."""
    l1, l2, l3 = lam
    return float(
        abs(l3 - l1 * l2) + abs(t[0]) + abs(t[1]) + abs(t[2] ** 2 - (1 - l1**2) * (1 - l2**2))
    )


def _extremal_permutation(lam: np.ndarray, t: np.ndarray) -> tuple[int, int, int]:
    best = None
    for k in range(3):
        i, j = (a for a in range(3) if a != k)
        if abs(lam[j]) > abs(lam[i]):
            i, j = j, i
        perm = (i, j, k)
        res = extremal_residual(lam[list(perm)], t[list(perm)])
        if best is None or res < best[0] - 1e-15:
            best = (res, perm)
    return best[1]


def to_canonical(channel: AffineChannel, ordering: Ordering = "descending") -> CanonicalChannel:
    """Reduce ``channel`` to signed-singular-value form.

    ``ordering`` is ``"descending"`` (``|lam|`` non-increasing), ``"extremal"``
    (the axis best satisfying ``lam3 = lam1 * lam2`` last, ``|lam1| >= |lam2|``)
    or an explicit axis order. Within degenerate blocks the frame is rotated
    so that the block's translation component lies along its last axis.
    """
    R1, lam, R2 = signed_svd(channel.M)
    t = R1.T @ channel.t
    scale = max(1.0, float(np.max(np.abs(lam))))
    for b in _blocks(lam, DEGENERACY_TOL * scale):
        w = t[b]
        if len(b) < 2 or np.linalg.norm(w) < 1e-15:
            continue
        Q = np.eye(3)
        Q[np.ix_(b, b)] = _complete_basis_with_last(w)
        R1 = R1 @ Q
        t = Q.T @ t
        t[b[:-1]] = 0.0
        if abs(lam[b[0]]) > ZERO_TOL * scale:
            R2 = Q.T @ R2

    if isinstance(ordering, str):
        if ordering == "descending":
            perm = tuple(int(i) for i in np.argsort(-np.abs(lam), kind="stable"))
        elif ordering == "extremal":
            perm = _extremal_permutation(lam, t)
        else:
            raise InvalidParameterError(f"unknown ordering {ordering!r}")
    else:
        perm = tuple(int(i) for i in ordering)
        if sorted(perm) != [0, 1, 2]:
            raise InvalidParameterError(f"ordering {ordering!r} is not a permutation of (0, 1, 2)")
    P = _signed_permutation(perm)
    return CanonicalChannel(
        lam=lam[list(perm)],
        t=P @ t,
        post_rotation=R1 @ P.T,
        pre_rotation=P @ R2,
    )


def _flip_matrix(axes: tuple[int, int]) -> np.ndarray:
    d = np.ones(3)
    d[list(axes)] = -1.0
    return np.diag(d)


def normalize_extremal_signs(c: CanonicalChannel, tol: float = 1e-9):
    """Bring an extremal canonical form to ``lam >= 0`` and ``t3 >= 0``.

    Returns ``(normalized, pre, post)`` with ``post ∘ normalized ∘ pre`` equal
    to ``c.diagonal_channel()``; ``pre`` and ``post`` are pi rotations (or the
    identity). A post-rotation flips ``t3`` together with ``lam3`` and one of
    ``lam1, lam2``; a pre-rotation flips any two ``lam`` and leaves ``t`` alone,
    as does a post pi-rotation about z.
    """
    lam = np.array(c.lam, dtype=float)
    t = np.array(c.t, dtype=float)
    l1, l2, l3 = lam
    if abs(t[0]) > tol or abs(t[1]) > tol or abs(l3 - l1 * l2) > tol:
        raise ClassificationError(f"lambda={lam.tolist()}, t={t.tolist()} is not sign-equivalent to an extremal form")
    if abs(t[2] ** 2 - (1 - l1**2) * (1 - l2**2)) > tol:
        raise ClassificationError(f"t3={t[2]} violates t3^2 = (1 - l1^2)(1 - l2^2)")

    def negatives(x):
        # entries within ZERO_TOL of zero carry no meaningful sign
        return [i for i in range(3) if x[i] < -ZERO_TOL]

    post_axes = None
    if t[2] < 0:
        post_axes = min([(0, 2), (1, 2)], key=lambda ax: len(negatives(_flip_matrix(ax) @ lam)))
        F = _flip_matrix(post_axes)
        lam, t = F @ lam, F @ t

    pre_axes = None
    negative = negatives(lam)
    if len(negative) == 1:
        zeros = [i for i in range(3) if abs(lam[i]) <= ZERO_TOL and i not in negative]
        if not zeros:
            raise ClassificationError(f"cannot clear a single negative sign in {lam.tolist()}")
        negative.append(zeros[0])
    if len(negative) == 3:
        raise ClassificationError(f"lambda={lam.tolist()} has determinant of the wrong sign")
    if len(negative) == 2:
        pair = tuple(sorted(negative))
        if pair == (0, 1) and post_axes is None:
            # pi rotation about z after the channel; t = (0, 0, t3) is untouched
            post_axes = pair
        else:
            pre_axes = pair
        lam = _flip_matrix(pair) @ lam
    lam = np.abs(lam)

    pre_M = _flip_matrix(pre_axes) if pre_axes else np.eye(3)
    post_M = _flip_matrix(post_axes) if post_axes else np.eye(3)
    normalized = CanonicalChannel(
        lam=lam,
        t=t,
        post_rotation=c.post_rotation @ post_M,
        pre_rotation=pre_M @ c.pre_rotation,
    )
    identity = Unitary((0.0, 0.0, 1.0), 0.0)
    pre = SignFlip(pre_axes) if pre_axes else identity
    post = SignFlip(post_axes) if post_axes else identity
    return normalized, pre, post
