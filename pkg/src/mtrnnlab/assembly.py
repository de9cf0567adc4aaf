"""Three modality networks joined by an association layer.

The speech network generates utterances from initial context states;
the somatosensory and visual networks abstract their input sequences
into final context states.  A fully connected association layer maps
the sigmoided sensory context states onto the speech network's initial
context states, so a perceived scene can trigger a verbal description.
"""

from dataclasses import dataclass, field

import numpy as np

from .activations import bounded_sigmoid, bounded_sigmoid_deriv
from .encoders import DecodedUtterance, EncodingSpec, SceneSample, decode_utterance
from .errors import DataError
from .network import (
    ClosedLoop,
    CscStore,
    Direction,
    IoActivation,
    NetworkParams,
    NetworkTopology,
    OpenLoop,
    run_sequence,
)
from .seeding import seed_stream
from .training import OptimizerState, TrainHyper, TrainReport, rprop_step, train


def auditory_topology(io_count: int = 44, cf_count: int = 80, cs_count: int = 23,
                      csc_count: int = 0, tau_cs: float = 70.0) -> NetworkTopology:
    return NetworkTopology(io_count=io_count, cf_count=cf_count, cs_count=cs_count,
                           csc_count=csc_count, direction=Direction.CONTEXT_BIAS,
                           io_activation=IoActivation.DECISIVE_NORMALISATION,
                           tau_io=2.0, tau_cf=5.0, tau_cs=tau_cs)


def somatosensory_topology(cf_count: int = 40, cs_count: int = 23,
                           csc_count: int = 0, tau_cs: float = 50.0) -> NetworkTopology:
    return NetworkTopology(io_count=5, cf_count=cf_count, cs_count=cs_count,
                           csc_count=csc_count,
                           direction=Direction.CONTEXT_ABSTRACTION,
                           io_activation=IoActivation.SIGMOID,
                           tau_io=2.0, tau_cf=5.0, tau_cs=tau_cs)


def visual_topology(cf_count: int = 40, cs_count: int = 23,
                    csc_count: int = 0, tau_cs: float = 16.0) -> NetworkTopology:
    return NetworkTopology(io_count=19, cf_count=cf_count, cs_count=cs_count,
                           csc_count=csc_count,
                           direction=Direction.CONTEXT_ABSTRACTION,
                           io_activation=IoActivation.SIGMOID,
                           tau_io=2.0, tau_cf=5.0, tau_cs=tau_cs)


@dataclass
class ModalityNet:
    topology: NetworkTopology
    params: NetworkParams
    store: CscStore
    opt: OptimizerState | None = None


@dataclass
class MultiModalModel:
    auditory: ModalityNet
    somatosensory: ModalityNet
    visual: ModalityNet
    ca_weights: np.ndarray  # (a_csc, s_csc + v_csc)
    ca_bias: np.ndarray     # (a_csc,)
    gen_steps: int          # closed-loop generation length
    encoding: EncodingSpec = field(default_factory=EncodingSpec)


@dataclass
class AssociatorReport:
    errors: list[float] = field(default_factory=list)
    converged: bool = False
    epochs_run: int = 0


def build_model(num_scenes: int, seed: int,
                a_topo: NetworkTopology | None = None,
                s_topo: NetworkTopology | None = None,
                v_topo: NetworkTopology | None = None,
                gen_steps: int = 60,
                weight_range: float = 0.025,
                initial_csc_range: float = 0.01,
                final_csc_range: float = 1.0) -> MultiModalModel:
    """Freshly initialised model with per-scene context stores."""
    a_topo = a_topo or auditory_topology()
    s_topo = s_topo or somatosensory_topology()
    v_topo = v_topo or visual_topology()
    nets = {}
    for tag, topo, param_path, store_path, kind, half in (
            ("auditory", a_topo, 201, 211, "initial", initial_csc_range),
            ("somatosensory", s_topo, 202, 212, "final", final_csc_range),
            ("visual", v_topo, 203, 213, "final", final_csc_range)):
        params = NetworkParams.init_random(topo, seed_stream(seed, param_path),
                                           weight_range)
        store = CscStore.init_random(kind, num_scenes, topo.csc_count,
                                     seed_stream(seed, store_path), half)
        nets[tag] = ModalityNet(topology=topo, params=params, store=store)
    ca_rng = seed_stream(seed, 204)
    in_dim = s_topo.csc_count + v_topo.csc_count
    ca_w = ca_rng.uniform(-weight_range, weight_range,
                          size=(a_topo.csc_count, in_dim))
    return MultiModalModel(auditory=nets["auditory"],
                           somatosensory=nets["somatosensory"],
                           visual=nets["visual"],
                           ca_weights=ca_w, ca_bias=np.zeros(a_topo.csc_count),
                           gen_steps=gen_steps)


def train_modalities(model: MultiModalModel, samples: list[SceneSample],
                     auditory_hyper: TrainHyper, somato_hyper: TrainHyper,
                     visual_hyper: TrainHyper) -> dict[str, TrainReport]:
    """Train the three networks independently on the given scenes.

    The speech network learns the utterance targets teacher-forced; the
    sensory networks abstract their clamped inputs with self-organising
    final context states.  Generation length follows the longest target.
    """
    if not samples:
        raise DataError("no scenes to train on")
    jobs = (("auditory", model.auditory, [s.utterance.data for s in samples],
             auditory_hyper),
            ("somatosensory", model.somatosensory,
             [s.proprio.data for s in samples], somato_hyper),
            ("visual", model.visual, [s.vision.data for s in samples],
             visual_hyper))
    reports = {}
    for tag, net, seqs, hyper in jobs:
        net.opt = OptimizerState.init(net.topology, hyper)
        reports[tag] = train(net.topology, net.params, net.store, seqs, hyper,
                             opt=net.opt)
    model.gen_steps = max(s.utterance.data.shape[0] for s in samples) + 9
    return reports


def associator_training_inputs(model: MultiModalModel,
                               samples: list[SceneSample] | None = None,
                               ) -> np.ndarray:
    """Sigmoided sensory context states, one row per scene.

    With samples given, the states are the abstractions the trained
    networks actually produce, which is also what the layer sees at
    inference; without samples the stored self-organised targets are
    used instead (they only coincide with the actual states when the
    abstraction error converged to zero, so the actual states are the
    default in the pipelines).
    """
    if samples is None:
        return bounded_sigmoid(np.hstack([model.somatosensory.store.values,
                                          model.visual.store.values]))
    pairs = [abstract_percepts(model, s.proprio.data, s.vision.data)
             for s in samples]
    return bounded_sigmoid(np.hstack([np.stack([p[0] for p in pairs]),
                                      np.stack([p[1] for p in pairs])]))


def train_associator(model: MultiModalModel, hyper: TrainHyper,
                     max_epochs: int = 5000,
                     convergence_threshold: float = 1e-6,
                     samples: list[SceneSample] | None = None,
                     ) -> AssociatorReport:
    """Delta-rule fit of the association layer on the per-scene contexts.

    Inputs are the sigmoided sensory final states (see
    :func:`associator_training_inputs`), targets the sigmoided speech
    initial states; steps use the same per-parameter adaptive-rate
    machinery as the networks.
    """
    n_scenes = model.auditory.store.values.shape[0]
    if (model.somatosensory.store.values.shape[0] != n_scenes
            or model.visual.store.values.shape[0] != n_scenes
            or (samples is not None and len(samples) != n_scenes)):
        raise DataError("context stores disagree on the number of scenes")
    inputs = associator_training_inputs(model, samples)
    targets = bounded_sigmoid(model.auditory.store.values)

    rate_w = np.full_like(model.ca_weights, hyper.eta0)
    rate_b = np.full_like(model.ca_bias, hyper.beta0)
    sign_w = np.zeros_like(model.ca_weights)
    sign_b = np.zeros_like(model.ca_bias)
    report = AssociatorReport()
    for epoch in range(1, max_epochs + 1):
        z = inputs @ model.ca_weights.T + model.ca_bias
        diff = bounded_sigmoid(z) - targets
        dz = diff * bounded_sigmoid_deriv(z)
        error = float(0.5 * np.sum(diff * diff))
        rprop_step(model.ca_weights, dz.T @ inputs, rate_w, sign_w, hyper)
        rprop_step(model.ca_bias, dz.sum(axis=0), rate_b, sign_b, hyper)
        report.errors.append(error)
        report.epochs_run = epoch
        if error <= convergence_threshold * n_scenes:
            report.converged = True
            break
    return report


def associator_forward(model: MultiModalModel, s_csc: np.ndarray,
                       v_csc: np.ndarray) -> np.ndarray:
    """Pre-activation output of the association layer for actual states."""
    u = bounded_sigmoid(np.concatenate([s_csc, v_csc]))
    return model.ca_weights @ u + model.ca_bias


def abstract_percepts(model: MultiModalModel, proprio: np.ndarray,
                      vision: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Final context states of both sensory networks for one scene."""
    if proprio.shape[0] < 2 or vision.shape[0] < 2:
        raise ValueError("sensory input needs at least one step")
    s_state = run_sequence(model.somatosensory.topology,
                           model.somatosensory.params, OpenLoop(proprio))
    v_state = run_sequence(model.visual.topology, model.visual.params,
                           OpenLoop(vision))
    return s_state.final_csc, v_state.final_csc


def perceive_and_describe(model: MultiModalModel, proprio: np.ndarray,
                          vision: np.ndarray) -> DecodedUtterance:
    """Produce the utterance a perceived scene triggers.

    The associated pre-activation is used directly as the speech
    network's initial context state (the association layer is trained to
    match it in activation space, and the activation is strictly
    monotone); generation then runs closed-loop and is decoded.  Nothing
    is mutated, so concurrent calls are safe.
    """
    s_csc, v_csc = abstract_percepts(model, proprio, vision)
    c_a0 = associator_forward(model, s_csc, v_csc)
    state = run_sequence(model.auditory.topology, model.auditory.params,
                         ClosedLoop(), steps=model.gen_steps, csc=c_a0)
    return decode_utterance(state.io_trajectory(), model.encoding)
