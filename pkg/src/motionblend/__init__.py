"""Single-shot skeletal motion blending toolkit.

Train one conditional generative model on a handful of BVH clips, then blend
them into controllable, temporally smooth animations in a single generative
pass, with a full metric suite for judging the result.
"""

__version__ = "0.1.0"

from .blending import BlendSchedule, blend, make_id_map
from .bvh import (
    BvhError,
    Joint,
    RawMotion,
    Skeleton,
    parse_bvh,
    resample,
    select_joints,
    trim,
    write_bvh,
)
from .metrics import ChannelStats, coverage, diversity, fid, smoothness
from .pyramid import (
    GenerationTrace,
    ModelConfig,
    PyramidModel,
    generate_full,
    load_checkpoint,
    save_checkpoint,
)
from .representation import (
    LevelSpec,
    MotionTensor,
    decode_motion,
    encode_motion,
    extract_contacts,
    forward_kinematics,
    rotation_from_6d,
    rotation_to_6d,
    temporal_resample,
)
from .skeleton_nn import SkeletonIdMap, build_neighborhoods
from .training import LossWeights, TrainConfig, contact_loss, gradient_penalty, train

__all__ = [
    "BlendSchedule",
    "BvhError",
    "ChannelStats",
    "GenerationTrace",
    "Joint",
    "LevelSpec",
    "LossWeights",
    "ModelConfig",
    "MotionTensor",
    "PyramidModel",
    "RawMotion",
    "Skeleton",
    "SkeletonIdMap",
    "TrainConfig",
    "blend",
    "build_neighborhoods",
    "contact_loss",
    "coverage",
    "decode_motion",
    "diversity",
    "encode_motion",
    "extract_contacts",
    "fid",
    "forward_kinematics",
    "generate_full",
    "gradient_penalty",
    "load_checkpoint",
    "make_id_map",
    "parse_bvh",
    "resample",
    "rotation_from_6d",
    "rotation_to_6d",
    "save_checkpoint",
    "select_joints",
    "smoothness",
    "temporal_resample",
    "train",
    "trim",
    "write_bvh",
]
