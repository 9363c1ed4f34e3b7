"""Edge point detection and refinement for point clouds of thin-walled structures."""

from .classifier import MlpModel, TrainConfig, load_model, predict, save_model, train
from .errors import DegenerateError, FormatError, ParseError, SpecError, UnsupportedFormatError
from .metrics import EvalReport, classification_metrics, ecd
from .neighborhood import LocalSphericalCurve, SpatialIndex, build_index, local_spherical_curve
from .normals import estimate_normal, fit_great_circle
from .pipeline import RunConfig, analyze_cloud, extract_edges
from .pointcloud import GroundTruthEdges, PointCloud, label_ground_truth, read_ply, read_xyz, write_ply, write_xyz
from .refine import RefineConfig, refine_all, refine_point
from .sh import build_grid, compute_descriptor, descriptor, dsht, kde_on_grid
from .synth import ShapeSpec, generate

__version__ = "0.1.0"
