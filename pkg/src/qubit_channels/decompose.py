"""Constructive factorization into small generators.

Unital channels factor into unitaries, phase flips with probability at most
``epsilon`` (or exactly 1/2) and rank-3 face channels. Extremal channels
factor into unitaries and extremal channels close to the identity (one pure
output) or with nearby input/output latitudes (two pure outputs).

Factors are listed outermost first: ``factors[0] ∘ factors[1] ∘ ... ∘ factors[-1]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .canonical import to_canonical
from .channel import (
    AffineChannel,
    Constant,
    Extremal,
    ExtremalAngles,
    FaceChannel,
    GeneratorSpec,
    PhaseFlip,
    SignFlip,
    Unitary,
    channel_from_dict,
    channel_to_dict,
    compose,
    generator_from_dict,
    generator_to_dict,
    make_generator,
    t_distance,
    unitary_from_rotation,
)
from .cp import require_cp
from .errors import ClassificationError, InvalidParameterError, UnsupportedDecompositionError
from .geometry import classify_uv, extremal_frame

DEFAULT_EPS = 0.05
UNITAL_TOL = 1e-12
Z_AXIS = (0.0, 0.0, 1.0)
_DEGENERATE = 1e-12


@dataclass(frozen=True, eq=False)
class DecompositionPlan:
    factors: tuple
    epsilon: float
    target: Optional[AffineChannel] = None
    recomposition_error: Optional[float] = None
    kind: str = "unital"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "target": None if self.target is None else channel_to_dict(self.target),
            "epsilon": self.epsilon,
            "factors": [generator_to_dict(f) for f in self.factors],
            "recomposition_error": self.recomposition_error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> DecompositionPlan:
        try:
            factors = tuple(generator_from_dict(f) for f in data["factors"])
            target = data.get("target")
            return cls(
                factors=factors,
                epsilon=float(data.get("epsilon", DEFAULT_EPS)),
                target=None if target is None else channel_from_dict(target),
                recomposition_error=data.get("recomposition_error"),
                kind=data.get("kind", "unital"),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidParameterError(f"malformed plan: {exc}") from exc


def recompose(plan: DecompositionPlan) -> tuple[AffineChannel, Optional[float]]:
    """Compose the factors; the error is the T-matrix Frobenius distance to the target, if any."""
    acc = AffineChannel.identity()
    for f in plan.factors:
        acc = compose(acc, make_generator(f))
    error = None if plan.target is None else t_distance(acc, plan.target)
    return acc, error


def _finish(factors: Sequence[GeneratorSpec], eps: float, target: AffineChannel, kind: str) -> DecompositionPlan:
    plan = DecompositionPlan(tuple(_merge_unitaries(factors)), eps, target, None, kind)
    _, error = recompose(plan)
    return DecompositionPlan(plan.factors, eps, target, error, kind)


def _is_identity(f: GeneratorSpec) -> bool:
    return isinstance(f, Unitary) and f.half_angle == 0.0


def _merge_unitaries(factors: Sequence[GeneratorSpec]) -> list:
    out: list = []
    for f in factors:
        if isinstance(f, SignFlip):
            f = unitary_from_rotation(make_generator(f).M)
        if isinstance(f, Unitary) and out and isinstance(out[-1], Unitary):
            f = unitary_from_rotation(make_generator(out.pop()).M @ make_generator(f).M)
        out.append(f)
    return [f for f in out if not _is_identity(f)]


def _check_eps(eps: float) -> None:
    if not 0 < eps < 0.5:
        raise InvalidParameterError(f"epsilon must lie in (0, 1/2), got {eps}")


# --- edge (phase flip) ----------------------------------------------------------


def edge_factors(t: float, eps: float = DEFAULT_EPS) -> list:
    """Phase flip ``PF(t)`` as ``n`` equal flips of probability at most ``eps``.

    ``(1 - 2 eps')^n = 1 - 2 t`` with ``n = ceil(ln(1 - 2t) / ln(1 - 2 eps))``;
    ``t = 1/2`` cannot be split, and ``t > 1/2`` is ``PF(1 - t)`` followed by a
    pi rotation about z.
    """
    _check_eps(eps)
    if not 0 <= t <= 1:
        raise InvalidParameterError(f"phase flip probability {t} outside [0, 1]")
    if t <= _DEGENERATE:
        return []
    if abs(t - 0.5) <= _DEGENERATE:
        return [PhaseFlip(0.5)]
    if t > 0.5:
        return [Unitary(Z_AXIS, math.pi / 2)] + edge_factors(1 - t, eps)
    n = max(1, math.ceil(math.log(1 - 2 * t) / math.log(1 - 2 * eps)))
    step = 0.5 * (1 - (1 - 2 * t) ** (1 / n))
    if step > eps:
        n += 1
        step = 0.5 * (1 - (1 - 2 * t) ** (1 / n))
    return [PhaseFlip(step)] * n


def decompose_edge(t: float, eps: float = DEFAULT_EPS) -> DecompositionPlan:
    return _finish(edge_factors(t, eps), eps, make_generator(PhaseFlip(t)), "edge")


# --- unital -----------------------------------------------------------------------


def _signed_permutations() -> list:
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            P = np.zeros((3, 3))
            for i, p in enumerate(perm):
                P[i, p] = signs[i]
            if np.linalg.det(P) > 0:
                mats.append(P)
    return mats


_SIGNED_PERMS = _signed_permutations()


def _diagonal_edge_factors(d: np.ndarray, eps: float) -> list:
    """Factor a diagonal edge channel ``diag(d)`` as ``P ∘ PF(t) ∘ Q`` with signed permutations ``P, Q``."""
    for k in range(3):
        c = float(np.delete(d, k)[0])
        target = np.diag(d)
        edge = np.diag([c, c, 1.0])
        for P in _SIGNED_PERMS:
            for Q in _SIGNED_PERMS:
                if np.max(np.abs(P @ edge @ Q - target)) <= 1e-12:
                    return [unitary_from_rotation(P)] + edge_factors((1 - c) / 2, eps) + [unitary_from_rotation(Q)]
    raise ClassificationError(f"diag{tuple(d)} is not an edge channel")


def _bow_tie(l1: float, l2: float, z: float):
    """Solve ``diag(l1, l2, z) = face(s, z) ∘ PF(t)``.

    Half 1, ``face = diag(1 + s(z-1), z + s(1-z), z)``: the face has
    ``f1 + f2 = 1 + z`` and ``f1 - f2 = (1 - z)(1 - 2s)``, so with
    ``c = 1 - 2t`` we get ``c = (l1 + l2) / (1 + z)`` and
    ``1 - 2s = (l1 - l2)(1 + z) / ((1 - z)(l1 + l2))``.
    Half 2, ``face = diag(z - s(1+z), 1 - s(1+z), z)``: ``f2 - f1 = 1 - z`` and
    ``f1 + f2 = (1 + z)(1 - 2s)``, so ``c = (l2 - l1) / (1 - z)`` and
    ``1 - 2s = (l1 + l2) / ((1 + z) c)``.
    Returns ``(half, s, t)`` or ``None`` when neither half applies.
    """
    c1 = (l1 + l2) / (1 + z)
    if abs(c1) <= _DEGENERATE and abs(l1 - l2) <= _DEGENERATE:
        return 1, 0.5, 0.5
    if c1 > _DEGENERATE:
        s = 0.5 * (1 - (l1 - l2) * (1 + z) / ((1 - z) * (l1 + l2)))
        if -_DEGENERATE <= s <= 1 + _DEGENERATE:
            return 1, min(1.0, max(0.0, s)), (1 - c1) / 2
    c2 = (l2 - l1) / (1 - z)
    if c2 > _DEGENERATE:
        s = 0.5 * (1 - (l1 + l2) / ((1 + z) * c2))
        if -_DEGENERATE <= s <= 1 + _DEGENERATE:
            return 2, min(1.0, max(0.0, s)), (1 - c2) / 2
    return None


def _unital_core(lam: np.ndarray, eps: float):
    """Factors of ``diag(lam)`` with ``lam[2]`` as the face height, or ``None``.

    Before solving, a sign flip or an axis swap brings ``(lam1, lam2)`` into
    the bow-tie covered by one of the two face halves.
    """
    l1, l2, z = (float(x) for x in lam)
    if abs(z) >= 1 - _DEGENERATE:
        return None
    pre: list = []
    post: list = []
    X, Y = (l1 + l2) / (1 + z), (l1 - l2) / (1 - z)
    if abs(X) >= abs(Y):
        if X < 0:
            pre = [SignFlip((0, 1))]
            l1, l2 = -l1, -l2
    elif Y > 0:
        # diag(l1, l2, z) = Rz(-pi/2) diag(l2, l1, z) Rz(pi/2)
        post, pre = [Unitary(Z_AXIS, -math.pi / 4)], [Unitary(Z_AXIS, math.pi / 4)]
        l1, l2 = l2, l1
    solved = _bow_tie(l1, l2, z)
    if solved is None:
        return None
    half, s, t = solved
    face = FaceChannel(s, z, half)
    if s <= _DEGENERATE or s >= 1 - _DEGENERATE:
        face_factors = _diagonal_edge_factors(np.diag(make_generator(face).M), eps)
    else:
        face_factors = [face]
    return post + face_factors + edge_factors(t, eps) + pre, 0.0 < s < 1.0


def decompose_unital(channel: AffineChannel, eps: float = DEFAULT_EPS) -> DecompositionPlan:
    """Factor a unital CP channel into unitaries, small phase flips, ``PF(1/2)`` and face channels."""
    _check_eps(eps)
    require_cp(channel)
    if np.linalg.norm(channel.t) > UNITAL_TOL:
        raise InvalidParameterError("channel is not unital")
    base = to_canonical(channel)
    if np.all(np.abs(np.abs(base.lam) - 1) <= _DEGENERATE):
        return _finish([unitary_from_rotation(channel.M)], eps, channel, "unital")
    fallback = None
    # prefer a face height that gives an interior (rank-3) face factor
    for perm in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
        c = to_canonical(channel, perm)
        core = _unital_core(c.lam, eps)
        if core is None:
            continue
        factors = [unitary_from_rotation(c.post_rotation)] + core[0] + [unitary_from_rotation(c.pre_rotation)]
        if core[1]:
            return _finish(factors, eps, channel, "unital")
        fallback = fallback or factors
    if fallback is None:
        raise ClassificationError(f"no bow-tie solution for lambda={base.lam.tolist()}")
    return _finish(fallback, eps, channel, "unital")


# --- extremal ---------------------------------------------------------------------


def one_po_factors(lam: float, eps: float) -> list:
    """``n`` equal one-pure-output factors ``Phi(mu)`` with ``mu^n = lam`` and ``mu >= 1 - eps``."""
    if not 0 < lam < 1:
        raise InvalidParameterError(f"one-pure-output parameter {lam} outside (0, 1)")
    n = max(1, math.ceil(math.log(lam) / math.log(1 - eps)))
    mu = lam ** (1 / n)
    if mu < 1 - eps:
        n += 1
        mu = lam ** (1 / n)
    u = math.acos(mu)
    return [Extremal(u, u)] * n


def two_po_factors(theta: float, omega: float, eps: float) -> list:
    """Split the latitude step ``theta -> omega`` into ``n = floor((omega - theta) / eps) + 1`` equal steps."""
    n = math.floor((omega - theta) / eps) + 1
    grid = [theta + k * (omega - theta) / n for k in range(n + 1)]
    grid[-1] = omega
    return [ExtremalAngles(grid[k], grid[k + 1]) for k in reversed(range(n))]


def decompose_extremal(channel: AffineChannel, eps: float = DEFAULT_EPS) -> DecompositionPlan:
    """Factor an extremal channel into unitaries and small extremal generators."""
    _check_eps(eps)
    require_cp(channel)
    frame = extremal_frame(channel)
    if frame is None:
        raise ClassificationError("channel is not extremal")
    cls = classify_uv(frame.u, frame.v)
    norm = frame.canonical
    if cls.kind == "OnePODeg":
        return _finish([Constant(tuple(channel.t / np.linalg.norm(channel.t)))], eps, channel, "extremal")
    if cls.kind == "Unitary":
        core: list = []
    elif cls.kind == "OnePONonDeg":
        core = one_po_factors(cls.lam, eps)
    elif cls.kind == "TwoPONonDeg":
        core = two_po_factors(cls.theta, cls.omega, eps)
    else:
        x = min(eps / 2, cls.omega / 2)
        core = two_po_factors(x, cls.omega, eps) + [ExtremalAngles(0.0, x)]
    factors = [unitary_from_rotation(norm.post_rotation)] + core + [unitary_from_rotation(norm.pre_rotation)]
    return _finish(factors, eps, channel, "extremal")


def decompose(channel: AffineChannel, eps: float = DEFAULT_EPS) -> DecompositionPlan:
    """Unital plan if ``t = 0``, extremal plan if extremal, otherwise :class:`UnsupportedDecompositionError`."""
    require_cp(channel)
    if np.linalg.norm(channel.t) <= UNITAL_TOL:
        return decompose_unital(channel, eps)
    if extremal_frame(channel) is not None:
        return decompose_extremal(channel, eps)
    raise UnsupportedDecompositionError("channel is neither unital nor extremal")


# --- membership -------------------------------------------------------------------


def membership_violations(plan: DecompositionPlan, tol: float = 1e-12) -> list[str]:
    """Factors outside the generator set for ``plan.epsilon``; empty when the plan is valid."""
    eps = plan.epsilon
    bad = []
    for i, f in enumerate(plan.factors):
        if isinstance(f, Unitary):
            ok = True
        elif isinstance(f, PhaseFlip):
            ok = f.t <= eps + tol or abs(f.t - 0.5) <= tol
        elif isinstance(f, FaceChannel):
            ok = plan.kind != "extremal" and 0 < f.s < 1 and -1 < f.z < 1
        elif isinstance(f, Extremal):
            ok = plan.kind == "extremal" and abs(f.u - f.v) <= tol and (1 - eps < math.cos(f.u) < 1 or f.u == 0)
        elif isinstance(f, ExtremalAngles):
            ok = plan.kind == "extremal" and f.omega - f.theta < eps
        elif isinstance(f, Constant):
            ok = plan.kind == "extremal" and abs(np.linalg.norm(f.bloch) - 1) <= 1e-9
        else:
            ok = False
        if not ok:
            bad.append(f"factor {i}: {generator_to_dict(f)}")
    return bad
