"""Network topology, parameters and the leaky-integrator forward pass.

A network is three horizontal layers (IO, fast context Cf, slow context
Cs) of leaky-integrator neurons with per-layer time constants.  A subset
of the slowest layer (the context-controlling units, one vector per
sequence) either seeds generation at t=0 (generation direction) or
accumulates an abstraction read out at t=T (abstraction direction).

Internal state update, for t >= 1:

    z[t] = (1 - 1/tau) * z[t-1] + (1/tau) * (W @ x[t] + b)

with x[t] assembled from the previous activations and, on the IO
partition, from the mode-specific input rule (clamped input, fed-back
output, or a teacher/self mixture).
"""

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from .activations import bounded_sigmoid, softmax
from .errors import ConfigError


class Direction(Enum):
    CONTEXT_BIAS = "context_bias"            # Csc seeds generation at t=0
    CONTEXT_ABSTRACTION = "context_abstraction"  # Csc read out at t=T


class IoActivation(Enum):
    DECISIVE_NORMALISATION = "decisive_normalisation"
    SIGMOID = "sigmoid"


@dataclass(frozen=True)
class NetworkTopology:
    """Layer sizes, per-layer time constants and variant flags.

    csc_count defaults to ceil(cs_count / 2) when not given.  Units are
    ordered IO, Cf, Cs; the Csc units are the leading csc_count units of
    the Cs block.
    """

    io_count: int
    cf_count: int
    cs_count: int
    direction: Direction
    io_activation: IoActivation
    tau_io: float = 2.0
    tau_cf: float = 5.0
    tau_cs: float = 70.0
    csc_count: int = 0  # 0 means "use the default"

    def __post_init__(self):
        if self.csc_count == 0:
            object.__setattr__(self, "csc_count", math.ceil(self.cs_count / 2))
        for name in ("io_count", "cf_count", "cs_count", "csc_count"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.csc_count > self.cs_count:
            raise ConfigError(
                f"csc_count ({self.csc_count}) exceeds cs_count ({self.cs_count})")
        for name in ("tau_io", "tau_cf", "tau_cs"):
            if getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def total(self) -> int:
        return self.io_count + self.cf_count + self.cs_count

    @property
    def io_slice(self) -> slice:
        return slice(0, self.io_count)

    @property
    def cf_slice(self) -> slice:
        return slice(self.io_count, self.io_count + self.cf_count)

    @property
    def cs_slice(self) -> slice:
        return slice(self.io_count + self.cf_count, self.total)

    @property
    def csc_slice(self) -> slice:
        start = self.io_count + self.cf_count
        return slice(start, start + self.csc_count)

    def tau_vector(self) -> np.ndarray:
        tau = np.empty(self.total)
        tau[self.io_slice] = self.tau_io
        tau[self.cf_slice] = self.tau_cf
        tau[self.cs_slice] = self.tau_cs
        return tau

    def connectivity_mask(self) -> np.ndarray:
        """Boolean (to, from) mask: layer chain without IO<->Cs shortcuts.

        Full recurrence inside every layer plus full bidirectional links
        between adjacent layers (IO<->Cf, Cf<->Cs).
        """
        n = self.total
        mask = np.ones((n, n), dtype=bool)
        mask[self.io_slice, self.cs_slice] = False
        mask[self.cs_slice, self.io_slice] = False
        return mask


@dataclass
class NetworkParams:
    """Weight matrix (to, from) and bias vector, with masked entries zero."""

    weights: np.ndarray
    biases: np.ndarray

    @classmethod
    def init_random(cls, topology: NetworkTopology, rng: np.random.Generator,
                    weight_range: float = 0.025) -> "NetworkParams":
        n = topology.total
        w = rng.uniform(-weight_range, weight_range, size=(n, n))
        w[~topology.connectivity_mask()] = 0.0
        return cls(weights=w, biases=np.zeros(n))

    def check_shape(self, topology: NetworkTopology) -> None:
        n = topology.total
        if self.weights.shape != (n, n) or self.biases.shape != (n,):
            raise ConfigError(
                f"parameter shapes {self.weights.shape}/{self.biases.shape} "
                f"do not match topology with {n} units")


@dataclass
class CscStore:
    """Per-sequence context unit states: initial (t=0) or final (t=T)."""

    kind: str  # "initial" | "final"
    values: np.ndarray  # (num_sequences, csc_count)

    def __post_init__(self):
        if self.kind not in ("initial", "final"):
            raise ConfigError(f"unknown CscStore kind {self.kind!r}")

    @classmethod
    def init_random(cls, kind: str, num_sequences: int, csc_count: int,
                    rng: np.random.Generator, half_range: float) -> "CscStore":
        vals = rng.uniform(-half_range, half_range, size=(num_sequences, csc_count))
        return cls(kind=kind, values=vals)


# ---------------------------------------------------------------------------
# IO input modes


@dataclass(frozen=True)
class ClosedLoop:
    """IO receives its own previous activation (free-running generation)."""


@dataclass(frozen=True)
class OpenLoop:
    """IO is driven by the given series.

    Abstraction networks clamp x[t] to series row t (sensory input);
    generation networks receive series row t-1 (the desired previous
    output), which makes the input independent of the produced output.
    """

    series: np.ndarray  # rows t = 0..T over the IO partition


@dataclass(frozen=True)
class TeacherForced:
    """IO receives alpha * series[t-1] + (1 - alpha) * y[t-1].

    Only meaningful for generation networks; alpha is the teacher
    fraction of the mixture.
    """

    alpha: float
    series: np.ndarray


Mode = ClosedLoop | OpenLoop | TeacherForced


def io_feedback_coeff(mode: Mode) -> float:
    """Sensitivity of the IO input at t+1 to the own activation at t."""
    if isinstance(mode, ClosedLoop):
        return 1.0
    if isinstance(mode, OpenLoop):
        return 0.0
    return 1.0 - mode.alpha


@dataclass
class NetworkState:
    """Full trajectory of a sequence evaluation, rows t = 0..T."""

    topology: NetworkTopology
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray

    @property
    def steps(self) -> int:
        return self.z.shape[0] - 1

    @property
    def final_csc(self) -> np.ndarray:
        """Internal states of the Csc units at the last time step."""
        return self.z[-1, self.topology.csc_slice].copy()

    def io_trajectory(self) -> np.ndarray:
        return self.y[:, self.topology.io_slice]


def _io_input(topology: NetworkTopology, mode: Mode, t: int,
              y_prev_io: np.ndarray) -> np.ndarray:
    if isinstance(mode, ClosedLoop):
        return y_prev_io
    if isinstance(mode, OpenLoop):
        row = t if topology.direction is Direction.CONTEXT_ABSTRACTION else t - 1
        return mode.series[row]
    return mode.alpha * mode.series[t - 1] + (1.0 - mode.alpha) * y_prev_io


def _activate(topology: NetworkTopology, z: np.ndarray) -> np.ndarray:
    y = bounded_sigmoid(z)
    if topology.io_activation is IoActivation.DECISIVE_NORMALISATION:
        y[topology.io_slice] = softmax(z[topology.io_slice])
    return y


def forward_step(topology: NetworkTopology, params: NetworkParams,
                 z_prev: np.ndarray, y_prev: np.ndarray, t: int,
                 mode: Mode) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One integration step t >= 1; returns (x[t], z[t], y[t])."""
    params.check_shape(topology)
    tau = topology.tau_vector()
    x = np.empty(topology.total)
    x[topology.cf_slice] = y_prev[topology.cf_slice]
    x[topology.cs_slice] = y_prev[topology.cs_slice]
    x[topology.io_slice] = _io_input(topology, mode, t, y_prev[topology.io_slice])
    z = (1.0 - 1.0 / tau) * z_prev + (params.weights @ x + params.biases) / tau
    return x, z, _activate(topology, z)


def initial_state(topology: NetworkTopology,
                  csc: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """States at t=0: all zeros, Csc units seeded for generation networks."""
    z0 = np.zeros(topology.total)
    if csc is not None:
        if len(csc) != topology.csc_count:
            raise ConfigError(
                f"csc vector of length {len(csc)} for csc_count {topology.csc_count}")
        z0[topology.csc_slice] = csc
    return z0, _activate(topology, z0)


def run_sequence(topology: NetworkTopology, params: NetworkParams,
                 mode: Mode, steps: int | None = None,
                 csc: np.ndarray | None = None) -> NetworkState:
    """Evaluate a whole sequence and return the trajectory.

    Generation networks require `csc` (the per-sequence initial context
    states); abstraction networks run from zero states with the IO
    partition clamped through an OpenLoop mode.  `steps` defaults to one
    less than the number of series rows.
    """
    params.check_shape(topology)
    if steps is None:
        if isinstance(mode, ClosedLoop):
            raise ValueError("steps is required for closed-loop runs")
        steps = mode.series.shape[0] - 1
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if topology.direction is Direction.CONTEXT_BIAS and csc is None:
        raise ConfigError("generation networks need initial Csc states")

    n = topology.total
    tau = topology.tau_vector()
    leak = 1.0 - 1.0 / tau
    w, b = params.weights, params.biases
    io = topology.io_slice

    x = np.zeros((steps + 1, n))
    z = np.zeros((steps + 1, n))
    y = np.zeros((steps + 1, n))
    z[0], y[0] = initial_state(topology, csc)
    if isinstance(mode, OpenLoop) and topology.direction is Direction.CONTEXT_ABSTRACTION:
        x[0, io] = mode.series[0]

    for t in range(1, steps + 1):
        x[t, topology.cf_slice.start:] = y[t - 1, topology.cf_slice.start:]
        x[t, io] = _io_input(topology, mode, t, y[t - 1, io])
        z[t] = leak * z[t - 1] + (w @ x[t] + b) / tau
        y[t] = _activate(topology, z[t])
    return NetworkState(topology=topology, x=x, z=z, y=y)
