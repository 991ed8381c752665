"""Unsupervised appearance models for multi-object tracking from tracker pseudo-labels."""
from .assign import AssignmentResult, solve_greedy, solve_optimal
from .core import BBox, Detection, Track, TrackState, bbox_to_measurement, iou, measurement_to_bbox
from .kernels import BACKEND
from .metrics import EvalReport, clear_mot, evaluate, identity_metrics
from .motio import Annotation, LabelRecord, SequenceBundle
from .reid import EmbeddingModel, TrainConfig, embed, generate_labels, train
from .trackers import OracleTracker, ReidConfig, ReidTracker, SortConfig, SortTracker, run_tracker

__version__ = "0.1.0"
