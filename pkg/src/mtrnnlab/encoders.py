"""Grammar, utterance spike-train codec and synthetic scene generators.

Utterances from a small action-colour-object grammar are rendered as
phoneme-level spike trains: one neuron per symbol, a Gaussian rise/fall
around each peak, and a decisive normalisation per time step.  The
sensory side is produced by seeded generators that mimic the recorded
modalities' format: 5 smooth joint-angle channels that depend on the
action only, and 16 shape + 3 colour channels that depend on the object
and colour only, so each modality alone stays ambiguous.
"""

from dataclasses import dataclass, field
from itertools import product
import json
import math

import numpy as np

from .activations import softmax
from .errors import ConfigError, DataError
from .seeding import seed_stream

# 40 phone symbols (ASCII phone set, no stress marks) + 4 pause/intonation
# signs.  Index order is fixed: alphabetical phones, then the signs.
PHONES = (
    "AA", "AE", "AH", "AO", "AW", "AX", "AY", "B", "CH", "D", "DH", "EH",
    "ER", "EY", "F", "G", "HH", "IH", "IY", "JH", "K", "L", "M", "N", "NG",
    "OW", "OY", "P", "R", "S", "SH", "T", "TH", "UH", "UW", "V", "W", "Y",
    "Z", "ZH",
)
SIGNS = ("SIL", "PER", "EXM", "QUM")
TERMINALS = ("PER", "EXM", "QUM")
ALPHABET = PHONES + SIGNS
ALPHABET_INDEX = {p: i for i, p in enumerate(ALPHABET)}

# Pronunciations (CMU dictionary, stress stripped) for the grammar words.
LEXICON: dict[str, tuple[str, ...]] = {
    "pull": ("P", "UH", "L"),
    "push": ("P", "UH", "SH"),
    "show": ("SH", "OW"),
    "me": ("M", "IY"),
    "slide": ("S", "L", "AY", "D"),
    "the": ("DH", "AH"),
    "blue": ("B", "L", "UW"),
    "green": ("G", "R", "IY", "N"),
    "red": ("R", "EH", "D"),
    "yellow": ("Y", "EH", "L", "OW"),
    "apple": ("AE", "P", "AH", "L"),
    "banana": ("B", "AH", "N", "AE", "N", "AH"),
    "dice": ("D", "AY", "S"),
    "phone": ("F", "OW", "N"),
}

ACTIONS = ("pull", "push", "show me", "slide")
COLOURS = ("blue", "green", "red", "yellow")
OBJECTS = ("apple", "banana", "dice", "phone")

PROPRIO_CHANNELS = 5
VISION_CHANNELS = 19  # 16 shape descriptors + 3 colour channels


@dataclass(frozen=True)
class EncodingSpec:
    """Constants of the utterance spike-train code."""

    gamma: int = 4        # head margin before the first peak
    omega: int = 4        # filter width (spread over [-omega/2, omega/2])
    sigma_sq: float = 0.3  # Gaussian sharpness
    v: int = 2            # steps between consecutive peaks
    io_count: int = len(ALPHABET)

    def __post_init__(self):
        for name in ("gamma", "omega", "sigma_sq", "v"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def lam(self) -> float:
        """Peak pre-activation scaling the normalised peak value to 0.9."""
        return math.log((0.9 / 0.1) * (self.io_count - 1))


@dataclass
class EncodedSequence:
    """A (T+1, channels) activation matrix with its symbolic annotation."""

    modality: str
    data: np.ndarray
    sentence: str | None = None
    triple: tuple[str, str, str] | None = None

    @property
    def steps(self) -> int:
        return self.data.shape[0] - 1

    @property
    def channels(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# Grammar and utterance codec


def grammar_enumerate() -> list[tuple[str, tuple[str, str, str]]]:
    """All 64 sentences 'ACT the COL OBJ.' with their symbolic triples."""
    out = []
    for action, colour, obj in product(ACTIONS, COLOURS, OBJECTS):
        out.append((f"{action} the {colour} {obj}.", (action, colour, obj)))
    return out


def sentence_words(sentence: str) -> list[str]:
    return sentence.rstrip(".!?").split()


def sentence_to_phonemes(sentence: str) -> tuple[str, ...]:
    """Word pronunciations in order, closed by a single PER sign."""
    phonemes: list[str] = []
    for word in sentence_words(sentence):
        if word not in LEXICON:
            raise DataError(f"word {word!r} not in lexicon")
        phonemes.extend(LEXICON[word])
    phonemes.append("PER")
    return tuple(phonemes)


def encode_phonemes(phonemes, spec: EncodingSpec = EncodingSpec()) -> np.ndarray:
    """Spike-train matrix for a phoneme string.

    Phoneme k peaks at t = gamma + k*v with Gaussian rise and fall over
    t_rel in [-omega/2, omega/2]; overlapping contributions to the same
    neuron take the maximum; every row is softmax-normalised, which puts
    an isolated peak at activation 0.9.
    """
    rows = spec.gamma + len(phonemes) * spec.v + spec.omega // 2 + 1
    z = np.zeros((rows, spec.io_count))
    half = spec.omega // 2
    for k, p in enumerate(phonemes):
        i = ALPHABET_INDEX[p]
        centre = spec.gamma + k * spec.v
        for t_rel in range(-half, half + 1):
            t = centre + t_rel
            if 0 <= t < rows:
                g = spec.lam * math.exp(-(t_rel ** 2) / (2.0 * spec.sigma_sq))
                z[t, i] = max(z[t, i], g)
    return np.vstack([softmax(row) for row in z])


def encode_utterance(sentence: str, spec: EncodingSpec = EncodingSpec(),
                     triple: tuple[str, str, str] | None = None) -> EncodedSequence:
    """Render a sentence as a per-step normalised spike-train matrix."""
    y = encode_phonemes(sentence_to_phonemes(sentence), spec)
    return EncodedSequence(modality="utterance", data=y, sentence=sentence,
                           triple=triple)


@dataclass
class DecodedUtterance:
    phonemes: tuple[str, ...]
    words: tuple[str, ...]
    unmatched: bool = False   # some phoneme span matched no word
    truncated: bool = False   # no terminal sign before the trajectory ended

    def sentence(self) -> str:
        mark = {"PER": ".", "EXM": "!", "QUM": "?"}.get(
            self.phonemes[-1] if self.phonemes else "", "")
        return " ".join(self.words) + mark


def _match_words(phonemes: list[str]) -> tuple[list[str], bool]:
    # longest-match against the lexicon; on failure skip one phoneme and
    # keep going so later words still score
    by_length = sorted(LEXICON.items(), key=lambda kv: -len(kv[1]))
    words: list[str] = []
    unmatched = False
    pos = 0
    while pos < len(phonemes):
        for word, pron in by_length:
            if tuple(phonemes[pos:pos + len(pron)]) == pron:
                words.append(word)
                pos += len(pron)
                break
        else:
            unmatched = True
            pos += 1
    return words, unmatched


def decode_utterance(trajectory: np.ndarray,
                     spec: EncodingSpec = EncodingSpec()) -> DecodedUtterance:
    """Read phonemes off the peak slots and collapse them into words.

    At every slot t = gamma + k*v the arg-max channel is emitted (ties
    break to the lowest index); decoding stops after the first terminal
    sign.  SIL symbols are dropped before word matching.
    """
    rows = trajectory.shape[0]
    phonemes: list[str] = []
    truncated = True
    k = 0
    while True:
        t = spec.gamma + k * spec.v
        if t >= rows:
            break
        symbol = ALPHABET[int(np.argmax(trajectory[t]))]
        phonemes.append(symbol)
        if symbol in TERMINALS:
            truncated = False
            break
        k += 1
    body = [p for p in phonemes if p not in TERMINALS and p != "SIL"]
    words, unmatched = _match_words(body)
    return DecodedUtterance(phonemes=tuple(phonemes), words=tuple(words),
                            unmatched=unmatched, truncated=truncated)


# ---------------------------------------------------------------------------
# Cosine toy dataset


def cosine_dataset() -> list[EncodedSequence]:
    """Four 33-step two-channel sequences of contrary cosine waves.

    The second channel mirrors the first around 0.5 (their sum is 1),
    and the four sequences differ only by quarter-period phase shifts.
    Values are mapped affinely to [0.1, 0.9].
    """
    t = np.arange(33)
    out = []
    for k in range(4):
        phase = k * math.pi / 2.0
        ch1 = 0.5 + 0.4 * np.cos(2.0 * math.pi * t / 32.0 + phase)
        data = np.column_stack([ch1, 1.0 - ch1])
        out.append(EncodedSequence(modality="cosine", data=data,
                                   sentence=f"phase={k}/4"))
    return out


# ---------------------------------------------------------------------------
# Synthetic sensory generators

_REST = (0.50, 0.30, 0.50, 0.40, 0.50)

# per-action keyframes: (time fraction, 5 joint values); trajectories are
# piecewise raised-cosine ramps between them
_ACTION_KEYFRAMES: dict[str, tuple[tuple[float, tuple[float, ...]], ...]] = {
    "pull": (
        (0.00, _REST),
        (0.30, (0.78, 0.50, 0.62, 0.62, 0.56)),
        (0.70, (0.34, 0.56, 0.44, 0.72, 0.50)),
        (1.00, (0.28, 0.36, 0.44, 0.52, 0.50)),
    ),
    "push": (
        (0.00, _REST),
        (0.30, (0.30, 0.46, 0.56, 0.66, 0.44)),
        (0.70, (0.72, 0.52, 0.62, 0.34, 0.56)),
        (1.00, (0.66, 0.36, 0.56, 0.34, 0.50)),
    ),
    "show_me": (
        (0.00, _REST),
        (0.40, (0.60, 0.72, 0.28, 0.24, 0.72)),
        (0.80, (0.60, 0.72, 0.28, 0.24, 0.72)),
        (1.00, (0.52, 0.42, 0.44, 0.36, 0.54)),
    ),
    "slide": (
        (0.00, _REST),
        (0.25, (0.56, 0.16, 0.70, 0.50, 0.40)),
        (0.75, (0.56, 0.84, 0.34, 0.50, 0.62)),
        (1.00, (0.50, 0.60, 0.40, 0.46, 0.50)),
    ),
}

# canonical colour channels (averaged R, G, B of the object area)
_COLOUR_RGB: dict[str, tuple[float, float, float]] = {
    "blue": (0.12, 0.22, 0.82),
    "green": (0.12, 0.72, 0.24),
    "red": (0.85, 0.12, 0.10),
    "yellow": (0.88, 0.84, 0.12),
}


def _action_key(action: str) -> str:
    key = action.replace(" ", "_")
    if key not in _ACTION_KEYFRAMES:
        raise ValueError(f"unknown action {action!r}")
    return key


def _ramp(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    w = 0.5 * (1.0 - math.cos(math.pi * s))
    return (1.0 - w) * a + w * b


def synth_proprioception(action: str, rng: np.random.Generator,
                         noise_level: float = 0.02,
                         steps: int = 50) -> EncodedSequence:
    """Five smooth joint-angle channels for one manipulation action.

    Keyframe poses depend on the action only; the seeded jitter moves
    keyframe timing and amplitude so variants of the same action differ
    slightly.  All values stay in [0, 1].  With noise_level 0 the
    trajectory is a pure function of (action, steps).
    """
    key = _action_key(action)
    frames = _ACTION_KEYFRAMES[key]
    times = np.array([f for f, _ in frames])
    poses = np.array([p for _, p in frames])
    if noise_level > 0.0:
        times = times + rng.normal(0.0, noise_level, size=times.shape)
        times[0], times[-1] = 0.0, 1.0
        times = np.maximum.accumulate(times)
        poses = poses + rng.normal(0.0, noise_level, size=poses.shape)

    rows = steps + 1
    data = np.empty((rows, PROPRIO_CHANNELS))
    for t in range(rows):
        s = t / steps
        seg = min(np.searchsorted(times, s, side="right"), len(times) - 1)
        t0, t1 = times[seg - 1], times[seg]
        frac = 0.0 if t1 <= t0 else (s - t0) / (t1 - t0)
        data[t] = _ramp(poses[seg - 1], poses[seg], min(max(frac, 0.0), 1.0))
    return EncodedSequence(modality="proprioception",
                           data=np.clip(data, 0.0, 1.0))


def _shape_profile(obj: str) -> np.ndarray:
    """16 contour radii, scale-normalised and sorted descending."""
    theta = np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False)
    if obj == "apple":
        r = 0.92 + 0.05 * np.cos(2.0 * theta)
    elif obj == "banana":
        r = 0.30 + 0.68 * np.abs(np.cos(theta / 2.0)) ** 1.6
    elif obj == "dice":
        r = 1.0 / np.maximum(np.abs(np.cos(theta)), np.abs(np.sin(theta)))
    elif obj == "phone":
        r = 1.0 / np.maximum(np.abs(np.cos(theta)) / 1.0,
                             np.abs(np.sin(theta)) / 0.42)
    else:
        raise ValueError(f"unknown object {obj!r}")
    r = r / r.max() * 0.95
    return np.sort(r)[::-1]


def synth_vision(colour: str, obj: str, rng: np.random.Generator,
                 noise_level: float = 0.02, steps: int = 50) -> EncodedSequence:
    """Quasi-static shape + colour channels for one perceived object.

    Channels 1..16 are the object's contour-distance profile (largest
    first, re-sorted per frame after jitter), channels 17..19 the mean
    R, G, B of the object area.  Independent of the manipulation.
    """
    if colour not in _COLOUR_RGB:
        raise ValueError(f"unknown colour {colour!r}")
    shape = _shape_profile(obj)
    rgb = np.array(_COLOUR_RGB[colour])
    rows = steps + 1
    data = np.empty((rows, VISION_CHANNELS))
    for t in range(rows):
        s = shape + rng.normal(0.0, noise_level, size=shape.shape)
        data[t, :16] = np.sort(np.clip(s, 0.0, 1.0))[::-1]
        data[t, 16:] = np.clip(
            rgb + rng.normal(0.0, noise_level, size=3), 0.0, 1.0)
    return EncodedSequence(modality="vision", data=data)


# ---------------------------------------------------------------------------
# Scene dataset


@dataclass
class SceneSample:
    scene_id: str
    triple: tuple[str, str, str]
    utterance: EncodedSequence
    proprio: EncodedSequence
    vision: EncodedSequence


@dataclass
class SceneDataset:
    samples: list[SceneSample]
    train_ids: list[int] = field(default_factory=list)  # indices into samples
    test_ids: list[int] = field(default_factory=list)

    def subset(self, split: str) -> list[int]:
        if split == "train":
            return self.train_ids
        if split == "test":
            return self.test_ids
        if split == "all":
            return list(range(len(self.samples)))
        raise ValueError(f"unknown split {split!r}")


def build_scene_dataset(seed: int,
                        actions: tuple[str, ...] = ACTIONS,
                        colours: tuple[str, ...] = COLOURS,
                        objects: tuple[str, ...] = OBJECTS,
                        variants: int = 4,
                        noise_level: float = 0.02,
                        base_steps: int = 50,
                        spec: EncodingSpec = EncodingSpec()) -> SceneDataset:
    """Jittered scene variants for every triple, split 50:50 by triple.

    Every triple is rendered `variants` times with seeded jitter and
    durations varied by +-20%; the train/test split assigns all variants
    of a triple to the same side.
    """
    triples = list(product(actions, colours, objects))
    rng = seed_stream(seed, 101)
    samples: list[SceneSample] = []
    for triple in triples:
        action, colour, obj = triple
        utter = encode_utterance(f"{action} the {colour} {obj}.", spec,
                                 triple=triple)
        for k in range(variants):
            steps = int(round(base_steps * (1.0 + rng.uniform(-0.2, 0.2))))
            pro = synth_proprioception(action, rng, noise_level, steps)
            vis = synth_vision(colour, obj, rng, noise_level, steps)
            pro.triple = vis.triple = triple
            samples.append(SceneSample(
                scene_id=f"{action.replace(' ', '_')}-{colour}-{obj}-v{k}",
                triple=triple, utterance=utter, proprio=pro, vision=vis))

    split_rng = seed_stream(seed, 102)
    order = split_rng.permutation(len(triples))
    train_triples = {triples[i] for i in order[:len(triples) // 2]}
    dataset = SceneDataset(samples=samples)
    for idx, sample in enumerate(samples):
        (dataset.train_ids if sample.triple in train_triples
         else dataset.test_ids).append(idx)
    return dataset


# ---------------------------------------------------------------------------
# Scene file round-trip (stable field names, exact decimal values)


def scene_to_dict(sample: SceneSample) -> dict:
    return {
        "id": sample.scene_id,
        "action": sample.triple[0],
        "colour": sample.triple[1],
        "object": sample.triple[2],
        "sentence": sample.utterance.sentence,
        "utterance": sample.utterance.data.tolist(),
        "proprioception": sample.proprio.data.tolist(),
        "vision": sample.vision.data.tolist(),
    }


def scene_from_dict(d: dict) -> SceneSample:
    triple = (d["action"], d["colour"], d["object"])
    return SceneSample(
        scene_id=d["id"],
        triple=triple,
        utterance=EncodedSequence("utterance", np.array(d["utterance"]),
                                  sentence=d["sentence"], triple=triple),
        proprio=EncodedSequence("proprioception",
                                np.array(d["proprioception"]), triple=triple),
        vision=EncodedSequence("vision", np.array(d["vision"]), triple=triple),
    )


def write_scene_files(dataset: SceneDataset, out_dir) -> None:
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for idx, sample in enumerate(dataset.samples):
        path = out / f"scene_{idx:03d}.json"
        path.write_text(json.dumps(scene_to_dict(sample), sort_keys=True))
    manifest = {
        "scenes": [s.scene_id for s in dataset.samples],
        "train_ids": dataset.train_ids,
        "test_ids": dataset.test_ids,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True,
                                                  indent=1))
