"""Qubit channels in affine Bloch form: complete-positivity checks, classification and decomposition."""

from .canonical import CanonicalChannel, normalize_extremal_signs, signed_svd, to_canonical
from .channel import (
    AffineChannel,
    Constant,
    Extremal,
    ExtremalAngles,
    FaceChannel,
    Permutation,
    PhaseFlip,
    SignFlip,
    Unitary,
    apply,
    bloch_from_density,
    channel_from_dict,
    channel_to_dict,
    compose,
    compose_all,
    density_from_bloch,
    make_generator,
)
from .cp import CPReport, Verdict, choi, choi_rotated, cp_report, fac_unital, gfa_general, is_cp, kraus_decomposition
from .decompose import DecompositionPlan, decompose, decompose_edge, decompose_extremal, decompose_unital, recompose
from .errors import (
    ChannelError,
    CircleContactError,
    ClassificationError,
    ConsistencyError,
    InvalidParameterError,
    NotCompletelyPositiveError,
    UnphysicalStateError,
    UnsupportedDecompositionError,
)
from .geometry import (
    ExtremalClass,
    PureOutputClass,
    extremal_class,
    extremal_test,
    is_indivisible,
    kraus_rank,
    pancake_margin,
    po_curvature_radius,
    po_unitality_check,
    pure_outputs,
    pure_outputs_oracle,
)
from .sampling import sample_channel

__all__ = [name for name in dir() if not name.startswith("_")]
