"""stirlab: a desk-scale simulator of robotic stirring for pest counting.

The package covers the whole loop: parametric stirring trajectories in
an annular trap, particle advection of pests under the stick's flow,
an occlusion-aware synthetic detector with counting metrics, a
quadratic confidence predictor, a confidence-driven adaptive-speed
controller, and an experiment harness with a CLI.
"""

from .arena import ArenaSpec, TemplateSpec
from .confidence import Coefficients, calibrate, design_row, fit, load, predict, save
from .controller import (ControllerConfig, ControllerState, Decision, Outcome,
                         Status, avg_change_rate, classify_outcome,
                         controller_step, update_speed)
from .errors import (ConfigError, ContractViolationError, CoefficientFileError,
                     FitError, GenerationError, InitializationError,
                     InsufficientHistoryError, ParameterError, StateError,
                     StirlabError)
from .fluidsim import (Density, FlowParams, Pest, Scene, StickState,
                       agitation_energy, init_scene, step, stick_velocity_field)
from .perception import (DetectionResult, DetectorParams, FeatureVector,
                         Visibility, compute_visibility, counting_confidence,
                         counting_error, extract_features, simulate_detection)
from .trajectory import (Path, PathCursor, TimedPath, TrajectoryKind,
                         ValidationReport, generate, path_length,
                         time_parameterize, validate)

__version__ = "0.1.0"
