import json
import math

import numpy as np
import pytest

from mtrnnlab.encoders import (
    ACTIONS,
    ALPHABET,
    ALPHABET_INDEX,
    COLOURS,
    LEXICON,
    OBJECTS,
    EncodingSpec,
    build_scene_dataset,
    cosine_dataset,
    decode_utterance,
    encode_phonemes,
    encode_utterance,
    grammar_enumerate,
    scene_from_dict,
    scene_to_dict,
    sentence_to_phonemes,
    sentence_words,
    synth_proprioception,
    synth_vision,
    write_scene_files,
)
from mtrnnlab.errors import DataError
from mtrnnlab.seeding import seed_stream


class TestAlphabet:
    def test_size_is_44(self):
        assert len(ALPHABET) == 44
        assert len(set(ALPHABET)) == 44

    def test_signs_at_fixed_tail_positions(self):
        assert ALPHABET[40:] == ("SIL", "PER", "EXM", "QUM")

    def test_lexicon_covers_grammar_and_uses_known_phonemes(self):
        words = set()
        for sentence, _ in grammar_enumerate():
            words.update(sentence_words(sentence))
        assert words <= set(LEXICON)
        for pron in LEXICON.values():
            assert all(p in ALPHABET_INDEX for p in pron)

    def test_no_pronunciation_is_a_prefix_of_another(self):
        prons = list(LEXICON.values())
        for a in prons:
            for b in prons:
                if a is not b:
                    assert a[:len(b)] != b


class TestGrammar:
    def test_enumerates_64_unique_sentences(self):
        sentences = grammar_enumerate()
        assert len(sentences) == 64
        assert len({s for s, _ in sentences}) == 64
        assert len({t for _, t in sentences}) == 64

    def test_contains_the_example_sentence(self):
        assert ("slide the red apple.", ("slide", "red", "apple")) \
            in grammar_enumerate()


class TestEncoding:
    spec = EncodingSpec()

    def test_lambda_value(self):
        assert self.spec.lam == pytest.approx(math.log(387.0), abs=1e-12)
        assert self.spec.lam == pytest.approx(5.9584, abs=1e-4)

    def test_peak_times_follow_head_margin_and_interval(self):
        enc = encode_utterance("pull the red dice.")
        phonemes = sentence_to_phonemes("pull the red dice.")
        for k, p in enumerate(phonemes):
            t = self.spec.gamma + k * self.spec.v
            assert ALPHABET[np.argmax(enc.data[t])] == p

    def test_isolated_peak_normalises_to_exactly_0_9(self):
        y = encode_phonemes(("AA",), self.spec)
        assert abs(y[self.spec.gamma].max() - 0.9) <= 1e-9

    def test_gaussian_neighbour_value(self):
        # one step off the peak carries exp(-1 / (2 * 0.3)) of it; the
        # pre-activation is recovered against a silent reference channel
        y = encode_phonemes(("AA",), self.spec)
        i = ALPHABET_INDEX["AA"]
        silent = ALPHABET_INDEX["AE"]
        z_side = math.log(y[self.spec.gamma + 1, i]
                          / y[self.spec.gamma + 1, silent])
        assert z_side / self.spec.lam == pytest.approx(
            math.exp(-1.0 / 0.6), rel=1e-9)
        assert math.exp(-1.0 / 0.6) == pytest.approx(0.18888, abs=1e-5)

    def test_rows_are_normalised(self):
        enc = encode_utterance("show me the green banana.")
        assert np.allclose(enc.data.sum(axis=1), 1.0, atol=1e-12)

    def test_row_count_formula(self):
        sentence = "push the blue phone."
        n = len(sentence_to_phonemes(sentence))
        enc = encode_utterance(sentence)
        assert enc.data.shape == (self.spec.gamma + n * self.spec.v
                                  + self.spec.omega // 2 + 1, 44)

    def test_unknown_word_rejected(self):
        with pytest.raises(DataError):
            encode_utterance("grasp the red apple.")


class TestDecoding:
    def test_round_trip_for_all_grammar_sentences(self):
        for sentence, _ in grammar_enumerate():
            decoded = decode_utterance(encode_utterance(sentence).data)
            assert decoded.sentence() == sentence
            assert decoded.phonemes == sentence_to_phonemes(sentence)
            assert not decoded.unmatched and not decoded.truncated

    def test_uniform_trajectory_breaks_ties_to_lowest_index(self):
        spec = EncodingSpec()
        traj = np.full((30, 44), 1.0 / 44.0)
        decoded = decode_utterance(traj, spec)
        assert decoded.truncated
        assert decoded.unmatched
        assert set(decoded.phonemes) == {ALPHABET[0]}

    def test_single_peak_substitution_changes_one_phoneme(self):
        sentence = "pull the red dice."
        spec = EncodingSpec()
        enc = encode_utterance(sentence)
        traj = enc.data.copy()
        k = 3  # replace the 4th phoneme slot with a different symbol
        t = spec.gamma + k * spec.v
        row = np.zeros(44)
        row[ALPHABET_INDEX["OY"]] = 1.0
        traj[t] = row
        original = list(sentence_to_phonemes(sentence))
        decoded = decode_utterance(traj, spec)
        assert list(decoded.phonemes) != original
        diffs = [i for i, (a, b) in enumerate(zip(decoded.phonemes, original))
                 if a != b]
        assert diffs == [k]


class TestCosineDataset:
    def test_shape_and_count(self):
        data = cosine_dataset()
        assert len(data) == 4
        assert all(d.data.shape == (33, 2) for d in data)

    def test_channels_are_contrary(self):
        for d in cosine_dataset():
            assert np.allclose(d.data.sum(axis=1), 1.0, atol=1e-12)

    def test_values_in_sigmoid_friendly_band(self):
        for d in cosine_dataset():
            assert d.data.min() >= 0.1 - 1e-12
            assert d.data.max() <= 0.9 + 1e-12

    def test_sequences_pairwise_distinct(self):
        data = cosine_dataset()
        for i in range(4):
            for j in range(i + 1, 4):
                assert np.linalg.norm(data[i].data - data[j].data) > 0.1


class TestProprioception:
    def test_noise_free_trajectories_depend_on_action_only(self):
        a = synth_proprioception("pull", seed_stream(0, 1), 0.0, steps=40)
        b = synth_proprioception("pull", seed_stream(99, 5), 0.0, steps=40)
        assert np.array_equal(a.data, b.data)

    def test_values_in_unit_interval(self):
        for action in ACTIONS:
            enc = synth_proprioception(action, seed_stream(1, 2), 0.05)
            assert enc.data.min() >= 0.0 and enc.data.max() <= 1.0
            assert enc.data.shape[1] == 5

    def test_unknown_action_rejected(self):
        with pytest.raises(ValueError):
            synth_proprioception("grab", seed_stream(0, 1))

    def test_actions_separate_beyond_jitter(self):
        rng = seed_stream(2, 1)
        noise = 0.02
        per_action = {a: [synth_proprioception(a, rng, noise, steps=50).data
                          for _ in range(25)] for a in ACTIONS}
        within = []
        for trajs in per_action.values():
            for i in range(len(trajs) - 1):
                within.append(np.linalg.norm(trajs[i] - trajs[i + 1]))
        across = []
        actions = list(per_action)
        for i in range(len(actions)):
            for j in range(i + 1, len(actions)):
                across.append(np.linalg.norm(per_action[actions[i]][0]
                                             - per_action[actions[j]][0]))
        assert np.mean(across) >= 3.0 * np.mean(within)


class TestVision:
    def test_channel_one_is_per_frame_maximum(self):
        enc = synth_vision("red", "banana", seed_stream(3, 1), 0.05)
        shape = enc.data[:, :16]
        assert np.allclose(shape[:, 0], shape.max(axis=1))
        assert enc.data.shape[1] == 19

    def test_red_object_has_dominant_red_channel(self):
        enc = synth_vision("red", "apple", seed_stream(3, 2), 0.02)
        r, g, b = enc.data[:, 16], enc.data[:, 17], enc.data[:, 18]
        assert np.all(r > g) and np.all(r > b)

    def test_shape_profiles_pairwise_distinguishable(self):
        sigma = 0.02
        profiles = {}
        for obj in OBJECTS:
            enc = synth_vision("blue", obj, seed_stream(4, 1), 0.0, steps=1)
            profiles[obj] = enc.data[0, :16]
        objs = list(profiles)
        for i in range(len(objs)):
            for j in range(i + 1, len(objs)):
                d = np.linalg.norm(profiles[objs[i]] - profiles[objs[j]])
                assert d > 5.0 * sigma

    def test_unknown_colour_or_object_rejected(self):
        with pytest.raises(ValueError):
            synth_vision("purple", "apple", seed_stream(0, 1))
        with pytest.raises(ValueError):
            synth_vision("red", "cup", seed_stream(0, 1))


class TestSceneDataset:
    def test_full_dataset_counts_and_split(self):
        ds = build_scene_dataset(seed=7)
        assert len(ds.samples) == 256
        assert len(ds.train_ids) == 128
        assert len(ds.test_ids) == 128
        train_triples = {ds.samples[i].triple for i in ds.train_ids}
        test_triples = {ds.samples[i].triple for i in ds.test_ids}
        assert not (train_triples & test_triples)

    def test_different_seeds_change_the_partition(self):
        a = build_scene_dataset(seed=1)
        b = build_scene_dataset(seed=2)
        ta = {a.samples[i].triple for i in a.train_ids}
        tb = {b.samples[i].triple for i in b.train_ids}
        assert ta != tb

    def test_durations_vary_and_modalities_align(self):
        ds = build_scene_dataset(seed=3, variants=4)
        lengths = {s.proprio.data.shape[0] for s in ds.samples}
        assert len(lengths) > 1
        for s in ds.samples:
            assert s.proprio.data.shape[0] == s.vision.data.shape[0]

    def test_sensory_channels_in_unit_interval(self):
        ds = build_scene_dataset(seed=4, actions=("pull",), colours=("red",),
                                 objects=("dice",), variants=2)
        for s in ds.samples:
            for enc in (s.proprio, s.vision):
                assert enc.data.min() >= 0.0 and enc.data.max() <= 1.0

    def test_scene_file_round_trip(self, tmp_path):
        ds = build_scene_dataset(seed=5, actions=("slide",), colours=("blue",),
                                 objects=("phone",), variants=1)
        write_scene_files(ds, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["scenes"] == [s.scene_id for s in ds.samples]
        loaded = scene_from_dict(
            json.loads((tmp_path / "scene_000.json").read_text()))
        assert loaded.scene_id == ds.samples[0].scene_id
        assert loaded.triple == ds.samples[0].triple
        assert np.array_equal(loaded.proprio.data, ds.samples[0].proprio.data)
        assert np.array_equal(loaded.vision.data, ds.samples[0].vision.data)
        assert np.array_equal(loaded.utterance.data,
                              ds.samples[0].utterance.data)
