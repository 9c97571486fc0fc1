"""Hard-label black-box adversarial attacks by boundary-distance minimization."""
from .boundary import (
    BoundaryDistance,
    DistanceEval,
    SearchParams,
    Status,
    Targeted,
    Untargeted,
    binary_search_bracket,
    evaluate_initial,
    evaluate_local,
    initialize_direction,
)
from .data import DatasetRecord, load_dataset
from .domain import DomainBounds, clamp_to_domain
from .kernels import BACKEND
from .models import GbdtModel, LinearModel, MlpModel, RadialModel
from .oracle import Oracle, load_model
from .rgf import AttackResult, AttackStatus, RgfConfig, reconstruct_adversarial, rgf_attack

__version__ = "0.1.0"
