"""splat4d: a 4D Gaussian scene engine for dynamic driving scenes.

Scenes are sequences of pixel-aligned Gaussian maps with dynamic masks,
camera poses, motion fields, and a sky dome.  The package composes them at
arbitrary query times, rasterizes them tile by tile, scores renders against
ground truth, applies instance-level edits, and serves everything over a
small HTTP API.
"""

from .scene_model import (
    CameraPose,
    DynamicMask,
    Frame,
    Gaussian,
    GaussianMap,
    GaussianSet,
    InsertedInstance,
    InstanceKeyframe,
    SceneSequence,
    Violation,
    binarize_mask,
    identity_pose,
    normalize_quaternion,
    validate_sequence,
)
from .temporal import (
    ComposedScene,
    DynamicSet,
    Provenance,
    TAG_DYNAMIC,
    TAG_SKY,
    TAG_STATIC,
    aggregate,
    decompose,
    modulate_opacities,
    modulate_opacity,
)
from .sky import SkyDome, build_sky, colorize_sky
from .motion import (
    InterpolationQuery,
    MotionField,
    ObjectTrack,
    interpolate_dynamic,
    interpolate_pose,
    label_dynamic_from_tracks,
    slerp,
)
from .renderer import (
    RenderSettings,
    RenderTarget,
    project_gaussian,
    render,
    render_reference,
    render_sky_mask,
)
from .metrics import (
    DepthAlignment,
    DepthEvalConfig,
    FlowMetrics,
    align_depth,
    bce,
    d_rmse,
    flow_metrics,
    psnr,
    ssim,
)
from .edits import (
    EditOp,
    EditResult,
    EditScript,
    InstanceInfo,
    UnknownInstanceError,
    apply_edit,
    apply_script,
    extract_instance,
    list_instances,
    parse_edit_script,
)
from .container import ContainerError, load_scene, save_scene, scene_from_bytes, scene_to_bytes
from .pipeline import QueryTimeError, compose_at, dynamic_at, pose_at, scene_and_pose_at
from .synthetic import import_synthetic

__version__ = "0.1.0"
