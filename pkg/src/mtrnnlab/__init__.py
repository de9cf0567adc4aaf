"""Multi-timescale recurrent network laboratory.

Leaky-integrator networks in two directions (context-seeded generation
and context-abstracting perception), adaptive full-batch training with
self-organising context states, a multi-modal model that grounds
utterance production in synthetic sensory scenes, and the metrics and
experiment pipelines to evaluate it all reproducibly.
"""

from .activations import KAPPA_H, KAPPA_W, bounded_sigmoid, bounded_sigmoid_deriv, softmax
from .errors import CheckpointError, ConfigError, DataError, TrainingDiverged
from .network import (
    ClosedLoop,
    CscStore,
    Direction,
    IoActivation,
    NetworkParams,
    NetworkState,
    NetworkTopology,
    OpenLoop,
    TeacherForced,
    forward_step,
    run_sequence,
)
from .training import (
    GradientSet,
    OptimizerState,
    TrainHyper,
    TrainReport,
    adapt_zeta,
    bptt_context_abstraction,
    bptt_context_bias,
    kld_error,
    rprop_update,
    train,
    update_final_csc,
    update_initial_csc,
)

__all__ = [name for name in dir() if not name.startswith("_")]
