"""Geometric classification of qubit channels.

Kraus rank, indivisibility, pure outputs (points where the output ellipsoid
touches the Bloch sphere), extremality and the taxonomy of extremal channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .canonical import CanonicalChannel, _extremal_permutation, normalize_extremal_signs, to_canonical
from .channel import HALF_PI, AffineChannel, extremal_angles_from_uv
from .cp import RANK_TOL, choi_eigenvalues, kraus_decomposition, q_values, require_cp
from .errors import CircleContactError, ClassificationError, ConsistencyError, InvalidParameterError

CONTACT_TOL = 1e-9
MERGE_TOL = 1e-6
AXIS_TOL = 1e-12
ANTIPODAL_TOL = 1e-8


# --- rank -----------------------------------------------------------------------


def kraus_rank(channel: AffineChannel, rank_tol: float = RANK_TOL, tol: float = 1e-10) -> int:
    """Number of Choi eigenvalues above ``rank_tol``."""
    require_cp(channel, tol)
    rank = int(np.sum(choi_eigenvalues(channel) > rank_tol))
    if not np.any(channel.t):
        lam = to_canonical(channel).lam
        from_q = int(np.sum(2 * q_values(lam) > rank_tol))
        if from_q != rank:
            raise ConsistencyError(f"Kraus rank {rank} from the Choi spectrum but {from_q} nonzero q_i")
    return rank


def is_indivisible(channel: AffineChannel, rank_tol: float = RANK_TOL) -> bool:
    """Non-unitary channels of Kraus rank 3 admit no factorization without a unitary factor."""
    return kraus_rank(channel, rank_tol) == 3


# --- pure outputs -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PureOutputClass:
    """``kind`` is ``"Zero"``, ``"One"``, ``"Two"`` or ``"All"``; ``points`` are output Bloch vectors."""

    kind: str
    points: tuple = ()

    @property
    def count(self) -> Optional[int]:
        return None if self.kind == "All" else len(self.points)

    def to_dict(self) -> dict:
        return {"class": self.kind, "points": [np.asarray(p).tolist() for p in self.points]}


def _class_from_points(points: list) -> PureOutputClass:
    kinds = {0: "Zero", 1: "One", 2: "Two"}
    if len(points) > 2:
        raise CircleContactError(f"{len(points)} separate contact points found")
    return PureOutputClass(kinds[len(points)], tuple(points))


def _merge(points: list, tol: float) -> list:
    merged: list = []
    for p in points:
        if all(np.linalg.norm(p - m) > tol for m in merged):
            merged.append(p)
    return merged


def _secular_root(c: np.ndarray, d: np.ndarray) -> float:
    """Largest ``delta >= 0`` with ``sum c_i^2 / (delta + d_i)^2 = 1`` (bisection)."""
    lo = 0.0
    hi = float(np.sum(np.abs(c))) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.sum(np.where(c != 0, c**2 / (mid + d) ** 2, 0.0))
        if g > 1:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _maximizers(lam: np.ndarray, t: np.ndarray) -> tuple[list, int]:
    """Maximizers of ``|diag(lam) r + t|`` on the unit sphere.

    Stationary points satisfy ``(mu - lam_i^2) r_i = lam_i t_i``; the global
    maximum has ``mu >= max lam_i^2``. Returns candidate inputs and the number
    of free directions (0: isolated points, 2: a circle, 3: the sphere).
    """
    lsq = lam**2
    top = float(np.max(lsq))
    d = top - lsq
    c = lam * t
    on_top = d <= AXIS_TOL
    fixed = ~on_top
    if np.any(np.abs(c[on_top]) > AXIS_TOL) or np.sum(c[fixed] ** 2 / d[fixed] ** 2) > 1:
        delta = _secular_root(np.where(on_top & (np.abs(c) <= AXIS_TOL), 0.0, c), np.where(on_top, 0.0, d))
        return [c / (delta + d)], 0
    # hard case: the multiplier sits at max lam^2, the top axes are free
    r = np.zeros(3)
    r[fixed] = c[fixed] / d[fixed]
    rho = math.sqrt(max(0.0, 1.0 - float(r @ r)))
    free = np.flatnonzero(on_top)
    if rho * math.sqrt(top) <= MERGE_TOL / 2:
        return [r], 0
    if len(free) == 1:
        plus, minus = r.copy(), r.copy()
        plus[free[0]], minus[free[0]] = rho, -rho
        return [plus, minus], 0
    r2 = r.copy()
    r2[free[0]] = rho
    return [r2], len(free)


def pure_outputs(channel: AffineChannel, tol: float = CONTACT_TOL) -> PureOutputClass:
    """Pure outputs of a CP channel, from the secular equation in the canonical frame."""
    require_cp(channel)
    c = to_canonical(channel)
    lam, t = c.lam, c.t
    if np.all(np.abs(lam) <= 1e-15):
        if np.linalg.norm(t) >= 1 - tol:
            return PureOutputClass("One", (channel.t.copy(),))
        return PureOutputClass("Zero")
    if np.all(np.abs(np.abs(lam) - 1) <= AXIS_TOL) and np.linalg.norm(t) <= tol:
        return PureOutputClass("All")
    inputs, free = _maximizers(lam, t)
    outputs = [lam * r + t for r in inputs]
    if np.linalg.norm(outputs[0]) < 1 - tol:
        return PureOutputClass("Zero")
    if free == 2:
        raise CircleContactError("output ellipsoid touches the sphere along a circle")
    if free == 3:
        return PureOutputClass("All")
    points = [c.post_rotation @ o for o in outputs]
    return _class_from_points(_merge(points, MERGE_TOL))


# --- grid oracle ------------------------------------------------------------------


@lru_cache(maxsize=4)
def _fibonacci_grid(n: int) -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    phi = math.pi * (1 + math.sqrt(5)) * i
    rxy = np.sqrt(1 - z * z)
    pts = np.column_stack([rxy * np.cos(phi), rxy * np.sin(phi), z])
    _, nbrs = cKDTree(pts).query(pts, k=9)
    pts.setflags(write=False)
    nbrs.setflags(write=False)
    return pts, nbrs[:, 1:]


def _tangent_basis(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.where(np.abs(p[:, [0]]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    e1 = np.cross(p, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    return e1, np.cross(p, e1)


def _refine(M: np.ndarray, t: np.ndarray, seeds: np.ndarray, h0: float, h_min: float = 1e-12) -> np.ndarray:
    """Compass search on the sphere for local maxima of ``|M r + t|``, all seeds at once."""
    steps = np.array([(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)], dtype=float)
    p = seeds.copy()
    h = np.full(len(p), h0)
    for _ in range(5000):
        active = h > h_min
        if not np.any(active):
            break
        e1, e2 = _tangent_basis(p)
        cand = p[:, None, :] + h[:, None, None] * (steps[None, :, 0, None] * e1[:, None, :] + steps[None, :, 1, None] * e2[:, None, :])
        cand /= np.linalg.norm(cand, axis=2, keepdims=True)
        vals = np.linalg.norm(cand @ M.T + t, axis=2)
        # move only on a real improvement; rounding-level ties keep the centre
        centre = vals[:, 4] >= vals.max(axis=1) - 1e-15
        best = np.where(centre, 4, np.argmax(vals, axis=1))
        p = np.where(active[:, None], cand[np.arange(len(p)), best], p)
        h = np.where(active & centre, h / 2, h)
    return p


def pure_outputs_oracle(channel: AffineChannel, n: int = 20000, tol: float = CONTACT_TOL, cluster_tol: float = 1e-3) -> PureOutputClass:
    """Brute-force pure outputs: sphere grid, local maxima, compass refinement.

    Works on the channel as given (no canonical frame), so it is independent
    of :func:`pure_outputs`.
    """
    M, t = channel.M, channel.t
    pts, nbrs = _fibonacci_grid(n)
    vals = np.linalg.norm(pts @ M.T + t, axis=1)
    if np.all(vals >= 1 - tol):
        outputs = pts @ M.T + t
        if np.max(np.linalg.norm(outputs - outputs[0], axis=1)) <= cluster_tol:
            return PureOutputClass("One", (outputs[0],))
        return PureOutputClass("All")
    local = np.flatnonzero(vals >= vals[nbrs].max(axis=1))
    local = local[np.argsort(-vals[local])][:64]
    top = np.argsort(-vals)[:32]
    seeds = pts[np.union1d(local, top)]
    refined = _refine(M, t, seeds, h0=math.sqrt(4 * math.pi / n))
    outputs = refined @ M.T + t
    norms = np.linalg.norm(outputs, axis=1)
    contact = outputs[norms >= 1 - tol]
    order = np.argsort(-np.linalg.norm(contact, axis=1))
    return _class_from_points(_merge(list(contact[order]), cluster_tol))


# --- pure output geometry -----------------------------------------------------------


def po_unitality_check(po: PureOutputClass, channel: AffineChannel, tol: float = 1e-9) -> bool:
    """For two pure outputs: antipodal exactly when the channel is unital.

    Returns whether the points are antipodal; raises :class:`ConsistencyError`
    if that disagrees with ``|t| <= tol``.
    """
    if po.kind != "Two":
        raise InvalidParameterError(f"needs exactly two pure outputs, got {po.kind}")
    p, q = (np.asarray(x, dtype=float) for x in po.points)
    angle = math.atan2(float(np.linalg.norm(np.cross(p, q))), float(p @ q))
    antipodal = math.pi - angle <= ANTIPODAL_TOL
    unital = float(np.linalg.norm(channel.t)) <= tol
    if antipodal != unital:
        raise ConsistencyError(f"pure outputs antipodal={antipodal} but channel unital={unital}")
    return antipodal


def po_curvature_radius(channel: AffineChannel, po: Optional[PureOutputClass] = None, index: int = 0) -> float:
    """Radius of curvature of the output ellipsoid at a pure output, within the plane through the origin and both pure outputs."""
    po = po or pure_outputs(channel)
    if po.kind != "Two":
        raise InvalidParameterError(f"needs two pure outputs, got {po.kind}")
    p = np.asarray(po.points[index], dtype=float)
    other = np.asarray(po.points[1 - index], dtype=float)
    e1 = p / np.linalg.norm(p)
    e2 = other - (other @ e1) * e1
    if np.linalg.norm(e2) < 1e-9:
        raise InvalidParameterError("pure outputs are (anti)parallel; the section plane is undefined")
    e2 /= np.linalg.norm(e2)
    Minv = np.linalg.inv(channel.M)
    A = Minv.T @ Minv  # ellipsoid: (x - t)^T A (x - t) = 1
    B = np.column_stack([e1, e2])
    g = B.T @ (2 * A @ (p - channel.t))
    H = B.T @ (2 * A) @ B
    fx, fy = g
    kappa = abs(fy * fy * H[0, 0] - 2 * fx * fy * H[0, 1] + fx * fx * H[1, 1]) / (fx * fx + fy * fy) ** 1.5
    return 1.0 / kappa


def pancake_margin(a, c):
    """Shift that makes a flattened spheroid (half-axes ``a, a, c``) touch the sphere in a circle, and the two CP margins.

    Returns ``(t3, (m_plus, m_minus))`` with ``m_pm = (c +- 1)^2 - 4 a^2 - t3^2``;
    both are negative throughout ``0 < c < a^2 <= 1``, so no such channel is CP.
    Accepts scalars or broadcastable arrays.
    """
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(a <= 0) or np.any(a > 1) or np.any(c <= 0) or np.any(c >= a * a):
        raise InvalidParameterError("need 0 < c < a^2 and 0 < a <= 1")
    t3 = np.sqrt((1 - a * a) * (a * a - c * c)) / a
    margins = ((c + 1) ** 2 - 4 * a * a - t3 * t3, (c - 1) ** 2 - 4 * a * a - t3 * t3)
    if t3.ndim == 0:
        return float(t3), (float(margins[0]), float(margins[1]))
    return t3, margins


# --- extremality ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExtremalFrame:
    """An extremal channel brought to ``post ∘ (diag(cos u, cos v, cos u cos v), sin u sin v e3) ∘ pre`` up to rotations."""

    u: float
    v: float
    canonical: CanonicalChannel
    pre: object
    post: object


def _uv_from_canonical(lam: np.ndarray) -> tuple[float, float]:
    u = math.atan2(math.sqrt(max(0.0, 1 - lam[0] ** 2)), lam[0])
    v = math.atan2(math.sqrt(max(0.0, 1 - lam[1] ** 2)), lam[1])
    return u, v


def _kraus_products_min_sv(channel: AffineChannel) -> float:
    """Smallest singular value of the vectorized products ``A_i^dagger A_j`` of the Kraus operators."""
    ops = kraus_decomposition(channel)
    vecs = np.array([(A.conj().T @ B).ravel() for A in ops for B in ops]).T
    return float(np.linalg.svd(vecs, compute_uv=False)[-1]) if vecs.shape[1] <= 4 else 0.0


ZERO_ANGLE = 1e-6


def extremal_frame(channel: AffineChannel, tol: float = CONTACT_TOL) -> Optional[ExtremalFrame]:
    """Match ``channel`` to the extremal family, or return ``None``."""
    base = to_canonical(channel)
    perms = [_extremal_permutation(base.lam, base.t)]
    perms += [p for p in ((1, 2, 0), (0, 2, 1), (0, 1, 2), (2, 1, 0), (1, 0, 2), (2, 0, 1)) if p not in perms]
    for perm in perms:
        c = to_canonical(channel, perm)
        if abs(c.lam[1]) > abs(c.lam[0]) + 1e-15:
            continue
        try:
            normalized, pre, post = normalize_extremal_signs(c, tol)
        except ClassificationError:
            continue
        u, v = _uv_from_canonical(normalized.lam)
        if u < ZERO_ANGLE and v < ZERO_ANGLE:
            u = v = 0.0
        elif u < ZERO_ANGLE:
            # identity on one axis: a phase flip, which is not extremal
            return None
        return ExtremalFrame(u, v, normalized, pre, post)
    return None


def extremal_test(channel: AffineChannel, tol: float = CONTACT_TOL) -> Optional[tuple[float, float]]:
    """Return ``(u, v)`` with ``u <= v`` if ``channel`` is extremal, else ``None``.

    The answer is cross-checked against the linear independence of the
    products of Kraus operators; a clear disagreement raises
    :class:`ConsistencyError`.
    """
    frame = extremal_frame(channel, tol)
    if choi_eigenvalues(channel)[0] < -1e-10:
        if frame is not None:
            raise ConsistencyError("map matches the extremal family but is not CP")
        return None
    sv = _kraus_products_min_sv(channel)
    if frame is not None and sv < 1e-10:
        raise ConsistencyError(f"extremal parameters found but Kraus products are dependent (sv={sv:.2e})")
    if frame is None and sv > 1e-7:
        raise ConsistencyError(f"no extremal parameters but Kraus products are independent (sv={sv:.2e})")
    return None if frame is None else (frame.u, frame.v)


@dataclass(frozen=True)
class ExtremalClass:
    """``kind`` is one of ``Unitary``, ``OnePODeg``, ``OnePONonDeg``, ``TwoPODeg``, ``TwoPONonDeg``."""

    kind: str
    u: float
    v: float
    lam: Optional[float] = None
    theta: Optional[float] = None
    omega: Optional[float] = None

    def to_dict(self) -> dict:
        out = {"class": self.kind, "u": self.u, "v": self.v}
        for key in ("lam", "theta", "omega"):
            value = getattr(self, key)
            if value is not None:
                out["lambda" if key == "lam" else key] = value
        return out


def classify_uv(u: float, v: float, tol: float = 1e-9) -> ExtremalClass:
    if u == 0.0 and v == 0.0:
        return ExtremalClass("Unitary", u, v)
    if abs(u - v) <= tol:
        if abs(v - HALF_PI) <= tol:
            return ExtremalClass("OnePODeg", u, v)
        return ExtremalClass("OnePONonDeg", u, v, lam=math.cos(u))
    if abs(v - HALF_PI) <= tol:
        return ExtremalClass("TwoPODeg", u, v, theta=0.0, omega=u)
    theta, omega = extremal_angles_from_uv(u, v)
    return ExtremalClass("TwoPONonDeg", u, v, theta=theta, omega=omega)


def extremal_class(channel: AffineChannel, tol: float = CONTACT_TOL) -> ExtremalClass:
    uv = extremal_test(channel, tol)
    if uv is None:
        raise ClassificationError("channel is not extremal")
    return classify_uv(*uv)


def classification_report(channel: AffineChannel, rank_tol: float = RANK_TOL) -> dict:
    """Everything the CLI ``classify`` command prints."""
    rank = kraus_rank(channel, rank_tol)
    po = pure_outputs(channel)
    uv = extremal_test(channel)
    return {
        "kraus_rank": rank,
        "indivisible": rank == 3,
        "pure_output": po.to_dict(),
        "extremal": None if uv is None else classify_uv(*uv).to_dict(),
    }
