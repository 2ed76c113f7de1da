"""Affine Bloch-ball representation of qubit channels.

A trace-preserving qubit map acts on Bloch vectors as ``r -> M r + t``. The
4x4 Pauli-basis matrix ``T = [[1, 0], [t, M]]`` is only materialized for I/O;
the first row is structural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar, Sequence, Union

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InvalidParameterError, UnphysicalStateError

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
IDENTITY2 = np.eye(2, dtype=complex)

BLOCH_TOL = 1e-12
HALF_PI = math.pi / 2


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AffineChannel:
    """Qubit map ``r -> M r + t`` on Bloch vectors.

    No complete-positivity guarantee is implied by construction; see
    :func:`qubit_channels.cp.is_cp`.
    """

    M: np.ndarray
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        M = _frozen(self.M)
        t = _frozen(self.t)
        if M.shape != (3, 3) or t.shape != (3,):
            raise InvalidParameterError(f"expected M of shape (3, 3) and t of shape (3,), got {M.shape} and {t.shape}")
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(t))):
            raise InvalidParameterError("channel entries must be finite")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> AffineChannel:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def diagonal(cls, lam: Sequence[float], t: Sequence[float] = (0.0, 0.0, 0.0)) -> AffineChannel:
        return cls(np.diag(np.asarray(lam, dtype=float)), t)

    @property
    def T(self) -> np.ndarray:
        T = np.zeros((4, 4))
        T[0, 0] = 1.0
        T[1:, 0] = self.t
        T[1:, 1:] = self.M
        return T

    @property
    def is_unital_form(self) -> bool:
        return not np.any(self.t)

    def __repr__(self) -> str:
        return f"AffineChannel(M={self.M.tolist()}, t={self.t.tolist()})"


def compose(outer: AffineChannel, inner: AffineChannel) -> AffineChannel:
    """Return ``outer ∘ inner`` (``inner`` acts first)."""
    return AffineChannel(outer.M @ inner.M, outer.M @ inner.t + outer.t)


def compose_all(channels: Sequence[AffineChannel]) -> AffineChannel:
    """Compose ``channels[0] ∘ channels[1] ∘ ... ∘ channels[-1]``."""
    acc = AffineChannel.identity()
    for ch in channels:
        acc = compose(acc, ch)
    return acc


def apply(channel: AffineChannel, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return channel.M @ r + channel.t


def t_distance(a: AffineChannel, b: AffineChannel) -> float:
    """Frobenius distance between the 4x4 T matrices."""
    return float(np.linalg.norm(a.T - b.T))


# --- states -----------------------------------------------------------------


def validate_bloch(r, tol: float = BLOCH_TOL) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (3,) or not np.all(np.isfinite(r)):
        raise InvalidParameterError(f"Bloch vector must be a finite 3-vector, got {r!r}")
    norm = float(np.linalg.norm(r))
    if norm > 1.0 + tol:
        raise UnphysicalStateError(f"Bloch vector norm {norm:.15g} exceeds 1")
    return r


def density_from_bloch(r, tol: float = BLOCH_TOL) -> np.ndarray:
    r = validate_bloch(r, tol)
    return 0.5 * (IDENTITY2 + r[0] * PAULI[0] + r[1] * PAULI[1] + r[2] * PAULI[2])


def bloch_from_density(rho) -> np.ndarray:
    """Inverse of :func:`density_from_bloch`: ``r_i = tr(rho sigma_i)``."""
    rho = np.asarray(rho, dtype=complex)
    return np.array([np.trace(rho @ p).real for p in PAULI])


# --- rotations --------------------------------------------------------------


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Right-handed rotation by ``angle`` about ``axis`` (Rodrigues form)."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    K = np.array([[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def unitary_from_rotation(R) -> Unitary:
    """Express an SO(3) matrix as a :class:`Unitary` generator."""
    rotvec = Rotation.from_matrix(np.asarray(R, dtype=float)).as_rotvec()
    angle = float(np.linalg.norm(rotvec))
    if angle < 1e-15:
        return Unitary((0.0, 0.0, 1.0), 0.0)
    return Unitary(tuple(rotvec / angle), angle / 2)


def extremal_uv_from_angles(theta: float, omega: float) -> tuple[float, float]:
    """Map pure input/output latitudes ``(theta, omega)`` to extremal angles ``(u, v)``."""
    cu = math.cos(omega) / math.cos(theta)
    cv = math.tan(theta) / math.tan(omega)
    return math.acos(min(1.0, cu)), math.acos(min(1.0, cv))


def extremal_angles_from_uv(u: float, v: float) -> tuple[float, float]:
    """Inverse of :func:`extremal_uv_from_angles`; undefined for ``u == v``."""
    theta = math.asin(min(1.0, math.tan(u) / math.tan(v))) if v < HALF_PI else 0.0
    omega = math.asin(min(1.0, math.sin(u) / math.sin(v)))
    return theta, omega


# --- generators -------------------------------------------------------------

_RANGE_TOL = 1e-12


@dataclass(frozen=True)
class Unitary:
    """Unitary conjugation: Bloch rotation by ``2 * half_angle`` about ``axis``."""

    axis: tuple[float, float, float]
    half_angle: float
    kind: ClassVar[str] = "unitary"

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if axis.shape != (3,) or not np.isfinite(norm) or norm == 0 or not math.isfinite(self.half_angle):
            raise InvalidParameterError("unitary needs a nonzero finite axis and a finite angle")
        object.__setattr__(self, "axis", tuple(float(x) for x in axis / norm))
        object.__setattr__(self, "half_angle", float(self.half_angle))

    def params(self) -> dict:
        return {"axis": list(self.axis), "half_angle": self.half_angle}


@dataclass(frozen=True)
class Permutation:
    """Cyclic relabelling of Bloch axes: ``e_i -> e_perm[i]``."""

    perm: tuple[int, int, int]
    kind: ClassVar[str] = "permutation"

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != [0, 1, 2]:
            raise InvalidParameterError(f"not a permutation of (0, 1, 2): {self.perm}")
        if round(np.linalg.det(_perm_matrix(perm))) != 1:
            # odd permutations have det -1 and are not completely positive
            raise InvalidParameterError(f"odd permutation {perm} is not a channel")
        object.__setattr__(self, "perm", perm)

    def params(self) -> dict:
        return {"perm": list(self.perm)}


@dataclass(frozen=True)
class SignFlip:
    """Negate two Bloch components (a pi rotation about the remaining axis)."""

    axes: tuple[int, int]
    kind: ClassVar[str] = "sign_flip"

    def __post_init__(self):
        axes = tuple(sorted(int(a) for a in self.axes))
        if len(axes) != 2 or axes[0] == axes[1] or not set(axes) <= {0, 1, 2}:
            raise InvalidParameterError(f"sign flip needs two distinct axes, got {self.axes}")
        object.__setattr__(self, "axes", axes)

    def params(self) -> dict:
        return {"axes": list(self.axes)}


@dataclass(frozen=True)
class PhaseFlip:
    """``rho -> (1 - t) rho + t Z rho Z``."""

    t: float
    kind: ClassVar[str] = "phase_flip"

    def __post_init__(self):
        if not -_RANGE_TOL <= self.t <= 1 + _RANGE_TOL:
            raise InvalidParameterError(f"phase flip probability {self.t} outside [0, 1]")
        object.__setattr__(self, "t", float(min(1.0, max(0.0, self.t))))

    def params(self) -> dict:
        return {"t": self.t}


@dataclass(frozen=True)
class Constant:
    """Replace every input by the state with Bloch vector ``bloch``."""

    bloch: tuple[float, float, float]
    kind: ClassVar[str] = "constant"

    def __post_init__(self):
        r = validate_bloch(self.bloch)
        object.__setattr__(self, "bloch", tuple(float(x) for x in r))

    def params(self) -> dict:
        return {"bloch": list(self.bloch)}


@dataclass(frozen=True)
class Extremal:
    """Extremal channel ``diag(cos u, cos v, cos u cos v)`` with ``t = (0, 0, sin u sin v)``."""

    u: float
    v: float
    kind: ClassVar[str] = "extremal"

    def __post_init__(self):
        u, v = float(self.u), float(self.v)
        if not (-_RANGE_TOL <= u <= HALF_PI + _RANGE_TOL and -_RANGE_TOL <= v <= HALF_PI + _RANGE_TOL):
            raise InvalidParameterError(f"extremal angles ({u}, {v}) outside [0, pi/2]")
        if u > v + _RANGE_TOL:
            raise InvalidParameterError(f"extremal angles need u <= v, got ({u}, {v})")
        if u <= _RANGE_TOL and v > _RANGE_TOL:
            raise InvalidParameterError("u = 0 with v != 0 is a phase flip, not an extremal channel")
        object.__setattr__(self, "u", min(max(u, 0.0), HALF_PI))
        object.__setattr__(self, "v", min(max(v, 0.0), HALF_PI))

    def params(self) -> dict:
        return {"u": self.u, "v": self.v}


@dataclass(frozen=True)
class ExtremalAngles:
    """Extremal channel taking pure inputs at latitude ``theta`` to pure outputs at latitude ``omega``."""

    theta: float
    omega: float
    kind: ClassVar[str] = "extremal_angles"

    def __post_init__(self):
        theta, omega = float(self.theta), float(self.omega)
        if not (0.0 <= theta < HALF_PI and 0.0 <= omega < HALF_PI):
            raise InvalidParameterError(f"latitudes ({theta}, {omega}) outside [0, pi/2)")
        if theta >= omega:
            raise InvalidParameterError(f"need theta < omega, got ({theta}, {omega})")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "omega", omega)

    def params(self) -> dict:
        return {"theta": self.theta, "omega": self.omega}


@dataclass(frozen=True)
class FaceChannel:
    """Unital channel on a rectangle edge of the tetrahedron cross-section at ``lambda_3 = z``."""

    s: float
    z: float
    half: int = 1
    kind: ClassVar[str] = "face"

    def __post_init__(self):
        if not -_RANGE_TOL <= self.s <= 1 + _RANGE_TOL:
            raise InvalidParameterError(f"face parameter s={self.s} outside [0, 1]")
        if not -1 - _RANGE_TOL <= self.z <= 1 + _RANGE_TOL:
            raise InvalidParameterError(f"face height z={self.z} outside [-1, 1]")
        if self.half not in (1, 2):
            raise InvalidParameterError(f"face half must be 1 or 2, got {self.half}")
        object.__setattr__(self, "s", float(min(1.0, max(0.0, self.s))))
        object.__setattr__(self, "z", float(min(1.0, max(-1.0, self.z))))

    def params(self) -> dict:
        return {"s": self.s, "z": self.z, "half": self.half}


GeneratorSpec = Union[Unitary, Permutation, SignFlip, PhaseFlip, Constant, Extremal, ExtremalAngles, FaceChannel]
GENERATOR_TYPES = {cls.kind: cls for cls in (Unitary, Permutation, SignFlip, PhaseFlip, Constant, Extremal, ExtremalAngles, FaceChannel)}


def _perm_matrix(perm) -> np.ndarray:
    P = np.zeros((3, 3))
    for i, p in enumerate(perm):
        P[p, i] = 1.0
    return P


def extremal_channel(u: float, v: float) -> AffineChannel:
    cu, cv = math.cos(u), math.cos(v)
    return AffineChannel(np.diag([cu, cv, cu * cv]), [0.0, 0.0, math.sin(u) * math.sin(v)])


def make_generator(spec: GeneratorSpec) -> AffineChannel:
    """Affine form of a generator."""
    if isinstance(spec, Unitary):
        return AffineChannel(rotation_matrix(spec.axis, 2 * spec.half_angle))
    if isinstance(spec, Permutation):
        return AffineChannel(_perm_matrix(spec.perm))
    if isinstance(spec, SignFlip):
        d = np.ones(3)
        d[list(spec.axes)] = -1.0
        return AffineChannel(np.diag(d))
    if isinstance(spec, PhaseFlip):
        c = 1.0 - 2.0 * spec.t
        return AffineChannel(np.diag([c, c, 1.0]))
    if isinstance(spec, Constant):
        return AffineChannel(np.zeros((3, 3)), spec.bloch)
    if isinstance(spec, Extremal):
        return extremal_channel(spec.u, spec.v)
    if isinstance(spec, ExtremalAngles):
        return extremal_channel(*extremal_uv_from_angles(spec.theta, spec.omega))
    if isinstance(spec, FaceChannel):
        s, z = spec.s, spec.z
        if spec.half == 1:
            lam = [1 + s * (z - 1), z + s * (1 - z), z]
        else:
            lam = [z - s * (1 + z), 1 - s * (1 + z), z]
        return AffineChannel.diagonal(lam)
    raise InvalidParameterError(f"unknown generator {spec!r}")


# --- JSON -------------------------------------------------------------------


def generator_to_dict(spec: GeneratorSpec) -> dict:
    return {"kind": spec.kind, **spec.params()}


def generator_from_dict(data: dict) -> GeneratorSpec:
    data = dict(data)
    try:
        cls = GENERATOR_TYPES[data.pop("kind")]
    except KeyError as exc:
        raise InvalidParameterError(f"unknown or missing generator kind in {data!r}") from exc
    try:
        return cls(**data)
    except TypeError as exc:
        raise InvalidParameterError(str(exc)) from exc


def channel_to_dict(channel: AffineChannel) -> dict:
    return {"M": channel.M.tolist(), "t": channel.t.tolist()}


def channel_from_dict(data: dict) -> AffineChannel:
    """Parse ``{"M": [[...]], "t": [...]}`` or the diagonal shorthand ``{"lambda": [...], "t": [...]}``."""
    if not isinstance(data, dict):
        raise InvalidParameterError("channel JSON must be an object")
    if ("M" in data) == ("lambda" in data):
        raise InvalidParameterError('channel JSON needs exactly one of "M" or "lambda"')
    t = data.get("t", [0.0, 0.0, 0.0])
    try:
        if "lambda" in data:
            lam = np.asarray(data["lambda"], dtype=float)
            if lam.shape != (3,):
                raise InvalidParameterError('"lambda" must have three entries')
            return AffineChannel.diagonal(lam, t)
        return AffineChannel(np.asarray(data["M"], dtype=float), np.asarray(t, dtype=float))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParameterError):
            raise
        raise InvalidParameterError(f"malformed channel JSON: {exc}") from exc
