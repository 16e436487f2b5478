"""Spherical range-image projection, label post-processing, and evaluation
toolkit for projection-based LiDAR semantic segmentation pipelines."""

from .errors import DataError, FormatError, RangesegError
from .interp import (
    InterpSpec,
    bilinear_upsample,
    distance_interpolate,
    fid_concat,
    interp_discrepancy,
)
from .normals import ChannelStats, NormalMap, build_input_tensor, estimate_normals
from .pointcloud_io import (
    LabelSet,
    PointCloud,
    RemapTable,
    read_labels,
    read_scan,
    remap_labels,
    write_labels,
    write_scan,
)
from .postprocess import (
    KnnParams,
    LabelImage,
    NlaParams,
    copy_pixel_label,
    knn_postprocess,
    nla,
    patch_oracle,
    true_3d_oracle,
)
from .projection import (
    OcclusionStats,
    PointProjection,
    ProjectionConfig,
    RangeImage,
    occlusion_stats,
    project,
    unproject_pixel,
)
from .evaluation import BenchReport, BlurReport, ConfusionMatrix, bench, blur_metric
from .scene import SceneObject, SceneSpec, pole_before_wall_spec, synth_scene

__version__ = "0.1.0"
