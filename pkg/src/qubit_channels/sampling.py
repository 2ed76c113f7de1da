"""Seeded random channels for tests and the CLI."""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial.transform import Rotation

from .channel import HALF_PI, AffineChannel, extremal_channel
from .cp import gfa_arrays
from .errors import InvalidParameterError

KINDS = ("unital", "general", "extremal")

# q -> lambda: lambda_k = 2 (q0 + q_k) - 1
_Q_TO_LAMBDA = np.array([[1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]], dtype=float)


def lambda_from_q(q) -> np.ndarray:
    return _Q_TO_LAMBDA @ np.asarray(q, dtype=float)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return Rotation.random(random_state=rng).as_matrix()


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_channel(seed=None, kind: str = "unital", rotate: bool = True, return_params: bool = False):
    """Draw a CP channel.

    ``unital``: Choi eigenvalues uniform on the simplex. ``general``: a unital
    draw plus a translation with uniform direction and ``|t|^2`` uniform up
    to the CP bound. ``extremal``: ``(u, v)`` uniform on ``0 < u <= v <= pi/2``.
    With ``rotate`` the diagonal form is sandwiched between random rotations.
    ``seed`` may be an int, ``None`` or a ``numpy.random.Generator``.
    """
    if kind not in KINDS:
        raise InvalidParameterError(f"kind must be one of {KINDS}, got {kind!r}")
    rng = _rng(seed)
    params: dict = {}
    if kind == "extremal":
        u, v = sorted(rng.uniform(0.0, HALF_PI, size=2))
        params.update(u=float(u), v=float(v))
        base = extremal_channel(u, v)
        lam, t = np.diag(base.M), base.t
    else:
        q = rng.dirichlet(np.ones(4))
        lam = lambda_from_q(q)
        t = np.zeros(3)
        params["q"] = q
        if kind == "general":
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            bound = max(float(gfa_arrays(lam, direction)["bound"]), 0.0)
            tsq = rng.uniform(0.0, bound)
            t = math.sqrt(tsq) * direction
            params.update(direction=direction, tsq=tsq, bound=bound)
    params["lambda"], params["t_canonical"] = lam, t
    if rotate:
        R1, R2 = random_rotation(rng), random_rotation(rng)
    else:
        R1 = R2 = np.eye(3)
    params["R1"], params["R2"] = R1, R2
    channel = AffineChannel(R1 @ np.diag(lam) @ R2, R1 @ t)
    return (channel, params) if return_params else channel
