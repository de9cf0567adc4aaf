"""Experiment pipelines behind the CLI: cosine study, multi-modal
training, generation, evaluation, sweeps and exports.

Every pipeline writes its artifacts into one run directory and is a
pure function of (config, seed): file contents are byte-identical on
reruns.  CSV files carry a config-hash comment line above the header.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
import io
import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from .assembly import (
    ModalityNet,
    MultiModalModel,
    abstract_percepts,
    associator_forward,
    build_model,
    perceive_and_describe,
    train_associator,
    train_modalities,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .config import (
    ExperimentConfig,
    apply_overrides,
    config_from_dict,
    config_hash,
    config_json,
    config_to_dict,
)
from .encoders import (
    SceneDataset,
    build_scene_dataset,
    cosine_dataset,
    scene_from_dict,
    sentence_to_phonemes,
    sentence_words,
    write_scene_files,
)
from .errors import ConfigError, DataError
from .metrics import (
    d_avg,
    d_inter,
    d_intra,
    d_rel,
    f1_word,
    mixed,
    normalized_edit_distance,
    pca_project,
)
from .network import CscStore, Direction, IoActivation, NetworkParams
from .seeding import derive_seed, seed_stream
from .training import OptimizerState, TrainReport, train


def write_csv(path, header, rows, cfg_hash: str) -> None:
    buf = io.StringIO()
    buf.write(f"# config-hash: {cfg_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    Path(path).write_text(buf.getvalue())


def _prepare_out(cfg: ExperimentConfig, out_dir) -> tuple[Path, str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.snapshot").write_text(config_json(cfg))
    return out, config_hash(cfg)


# ---------------------------------------------------------------------------
# Cosine experiment


def run_cosine(cfg: ExperimentConfig, out_dir) -> Path:
    """Self-organisation study on the contrary-cosine toy data.

    Trains one abstraction network per (forcing value, seed) cell and
    records convergence effort plus the spread statistics of the final
    context patterns.
    """
    out, h = _prepare_out(cfg, out_dir)
    topo = cfg.cosine.topology.build(Direction.CONTEXT_ABSTRACTION,
                                     IoActivation.SIGMOID)
    seqs = [c.data for c in cosine_dataset()]

    run_rows, pattern_rows = [], []
    for psi in cfg.cosine.psi_grid:
        hyper = replace(cfg.cosine.hyper.build(), psi=psi)
        for seed_i in range(cfg.cosine.seeds):
            params = NetworkParams.init_random(
                topo, seed_stream(cfg.seed, 202, seed_i))
            store = CscStore.init_random(
                "final", len(seqs), topo.csc_count,
                seed_stream(cfg.seed, 212, seed_i), 1.0)
            report = train(topo, params, store, seqs, hyper)
            run_rows.append([psi, seed_i, report.epochs_run,
                             int(report.converged), report.errors[-1],
                             d_avg(store.values), d_rel(store.values)])
            for s in range(len(seqs)):
                pattern_rows.append([psi, seed_i, s]
                                    + [float(v) for v in store.values[s]])

    write_csv(out / "cosine_runs.csv",
              ["psi", "seed", "epochs", "converged", "final_error",
               "d_avg", "d_rel"], run_rows, h)
    unit_cols = [f"csc_{i}" for i in range(topo.csc_count)]
    write_csv(out / "csc_patterns.csv",
              ["psi", "seed", "sequence"] + unit_cols, pattern_rows, h)

    summary_rows = []
    for psi in cfg.cosine.psi_grid:
        cell = [r for r in run_rows if r[0] == psi]
        for col, name in ((2, "epochs"), (5, "d_avg"), (6, "d_rel")):
            vals = np.array([r[col] for r in cell], dtype=np.float64)
            summary_rows.append([psi, name, float(vals.mean()),
                                 float(vals.std(ddof=1) / np.sqrt(len(vals)))
                                 if len(vals) > 1 else 0.0])
    write_csv(out / "cosine_summary.csv",
              ["psi", "metric", "mean", "stderr"], summary_rows, h)
    return out


# ---------------------------------------------------------------------------
# Dataset handling


def load_or_build_dataset(cfg: ExperimentConfig,
                          dataset_seed: int | None = None) -> SceneDataset:
    if cfg.dataset.dir is not None:
        return load_scene_dir(cfg.dataset.dir)
    seed = cfg.seed if dataset_seed is None else dataset_seed
    return build_scene_dataset(seed,
                               actions=tuple(cfg.dataset.actions),
                               colours=tuple(cfg.dataset.colours),
                               objects=tuple(cfg.dataset.objects),
                               variants=cfg.dataset.variants,
                               noise_level=cfg.dataset.noise_level,
                               base_steps=cfg.dataset.base_steps)


def load_scene_dir(path) -> SceneDataset:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"no manifest.json in {root}")
    manifest = json.loads(manifest_path.read_text())
    samples = []
    for idx in range(len(manifest["scenes"])):
        samples.append(scene_from_dict(
            json.loads((root / f"scene_{idx:03d}.json").read_text())))
    return SceneDataset(samples=samples, train_ids=manifest["train_ids"],
                        test_ids=manifest["test_ids"])


def run_dataset(cfg: ExperimentConfig, out_dir) -> Path:
    out, _ = _prepare_out(cfg, out_dir)
    write_scene_files(load_or_build_dataset(cfg), out)
    return out


# ---------------------------------------------------------------------------
# Multi-modal pipeline


def train_pipeline(cfg: ExperimentConfig, model_seed: int | None = None,
                   dataset_seed: int | None = None,
                   ) -> tuple[MultiModalModel, SceneDataset, dict]:
    """Build the dataset, train all three networks and the associator."""
    dataset = load_or_build_dataset(cfg, dataset_seed)
    train_samples = [dataset.samples[i] for i in dataset.train_ids]
    mc = cfg.model
    model = build_model(
        num_scenes=len(train_samples),
        seed=cfg.seed if model_seed is None else model_seed,
        a_topo=mc.auditory.build(Direction.CONTEXT_BIAS,
                                 IoActivation.DECISIVE_NORMALISATION),
        s_topo=mc.somatosensory.build(Direction.CONTEXT_ABSTRACTION,
                                      IoActivation.SIGMOID),
        v_topo=mc.visual.build(Direction.CONTEXT_ABSTRACTION,
                               IoActivation.SIGMOID),
        weight_range=mc.weight_range,
        initial_csc_range=mc.initial_csc_range,
        final_csc_range=mc.final_csc_range)
    reports = train_modalities(model, train_samples,
                               mc.auditory_hyper.build(),
                               mc.somatosensory_hyper.build(),
                               mc.visual_hyper.build())
    ca_report = train_associator(model, mc.auditory_hyper.build(),
                                 max_epochs=mc.associator_epochs,
                                 convergence_threshold=mc.associator_threshold,
                                 samples=train_samples)
    reports["associator"] = ca_report
    return model, dataset, reports


_NET_TAGS = ("auditory", "somatosensory", "visual")


def checkpoint_arrays(model: MultiModalModel) -> dict[str, np.ndarray]:
    arrays = {}
    for tag in _NET_TAGS:
        net: ModalityNet = getattr(model, tag)
        arrays[f"{tag}.weights"] = net.params.weights
        arrays[f"{tag}.biases"] = net.params.biases
        arrays[f"{tag}.csc"] = net.store.values
        if net.opt is not None:
            arrays[f"{tag}.eta"] = net.opt.eta
            arrays[f"{tag}.beta"] = net.opt.beta
            arrays[f"{tag}.zeta"] = net.opt.zeta
            arrays[f"{tag}.sign_w"] = net.opt.prev_sign_w
            arrays[f"{tag}.sign_b"] = net.opt.prev_sign_b
    arrays["ca.weights"] = model.ca_weights
    arrays["ca.bias"] = model.ca_bias
    return arrays


def model_from_checkpoint(payload: dict) -> tuple[ExperimentConfig, MultiModalModel]:
    cfg = config_from_dict(payload["config"])
    arrays = payload["arrays"]
    mc = cfg.model
    topos = {
        "auditory": mc.auditory.build(Direction.CONTEXT_BIAS,
                                      IoActivation.DECISIVE_NORMALISATION),
        "somatosensory": mc.somatosensory.build(Direction.CONTEXT_ABSTRACTION,
                                                IoActivation.SIGMOID),
        "visual": mc.visual.build(Direction.CONTEXT_ABSTRACTION,
                                  IoActivation.SIGMOID),
    }
    nets = {}
    for tag in _NET_TAGS:
        params = NetworkParams(weights=arrays[f"{tag}.weights"],
                               biases=arrays[f"{tag}.biases"])
        kind = "initial" if tag == "auditory" else "final"
        store = CscStore(kind=kind, values=arrays[f"{tag}.csc"])
        opt = None
        if f"{tag}.eta" in arrays:
            opt = OptimizerState(eta=arrays[f"{tag}.eta"],
                                 beta=arrays[f"{tag}.beta"],
                                 zeta=arrays[f"{tag}.zeta"],
                                 prev_sign_w=arrays[f"{tag}.sign_w"],
                                 prev_sign_b=arrays[f"{tag}.sign_b"])
        nets[tag] = ModalityNet(topology=topos[tag], params=params,
                                store=store, opt=opt)
    model = MultiModalModel(auditory=nets["auditory"],
                            somatosensory=nets["somatosensory"],
                            visual=nets["visual"],
                            ca_weights=arrays["ca.weights"],
                            ca_bias=arrays["ca.bias"],
                            gen_steps=payload["meta"]["gen_steps"])
    return cfg, model


def run_train(cfg: ExperimentConfig, out_dir) -> Path:
    out, h = _prepare_out(cfg, out_dir)
    model, dataset, reports = train_pipeline(cfg)

    epoch_rows = []
    for tag in _NET_TAGS:
        rep: TrainReport = reports[tag]
        for i, err in enumerate(rep.errors):
            epoch_rows.append([tag, i + 1, err, rep.rate_mean[i],
                               rep.rate_min[i], rep.rate_max[i],
                               rep.zeta_mean[i]])
    for i, err in enumerate(reports["associator"].errors):
        epoch_rows.append(["associator", i + 1, err, "", "", "", ""])
    write_csv(out / "epochs.csv",
              ["net", "epoch", "error", "rate_mean", "rate_min", "rate_max",
               "zeta_mean"], epoch_rows, h)

    pattern_rows = []
    train_samples = [dataset.samples[i] for i in dataset.train_ids]
    for tag in _NET_TAGS:
        net: ModalityNet = getattr(model, tag)
        for row, sample in zip(net.store.values, train_samples):
            pattern_rows.append([tag, sample.scene_id, *sample.triple]
                                + [float(v) for v in row])
    max_csc = max(getattr(model, t).topology.csc_count for t in _NET_TAGS)
    write_csv(out / "csc_patterns.csv",
              ["net", "scene_id", "action", "colour", "object"]
              + [f"csc_{i}" for i in range(max_csc)], pattern_rows, h)

    save_checkpoint(out / "checkpoint.bin",
                    config_dict=config_to_dict(cfg), seed=cfg.seed,
                    epoch=max(reports[t].epochs_run for t in _NET_TAGS),
                    arrays=checkpoint_arrays(model),
                    meta={"gen_steps": model.gen_steps,
                          "train_ids": dataset.train_ids,
                          "test_ids": dataset.test_ids,
                          "epochs": {t: reports[t].epochs_run
                                     for t in _NET_TAGS},
                          "converged": {t: reports[t].converged
                                        for t in _NET_TAGS}})
    return out


# ---------------------------------------------------------------------------
# Generation and evaluation


def produce_for_scenes(model: MultiModalModel, dataset: SceneDataset,
                       indices) -> list[dict]:
    split_of = {i: "train" for i in dataset.train_ids}
    split_of.update({i: "test" for i in dataset.test_ids})
    rows = []
    for idx in indices:
        sample = dataset.samples[idx]
        decoded = perceive_and_describe(model, sample.proprio.data,
                                        sample.vision.data)
        target_words = sentence_words(sample.utterance.sentence)
        target_phonemes = sentence_to_phonemes(sample.utterance.sentence)
        rows.append({
            "index": idx,
            "scene_id": sample.scene_id,
            "split": split_of.get(idx, "all"),
            "triple": sample.triple,
            "target_sentence": sample.utterance.sentence,
            "produced_sentence": decoded.sentence(),
            "produced_words": list(decoded.words),
            "produced_phonemes": list(decoded.phonemes),
            "truncated": decoded.truncated,
            "unmatched": decoded.unmatched,
            "f1": f1_word(list(decoded.words), target_words),
            "edit_norm": normalized_edit_distance(decoded.phonemes,
                                                  target_phonemes),
        })
    return rows


def _generation_csv(out, name, rows, h):
    write_csv(out / name,
              ["index", "scene_id", "split", "action", "colour", "object",
               "target_sentence", "produced_sentence", "produced_phonemes",
               "truncated", "unmatched", "f1", "edit_norm"],
              [[r["index"], r["scene_id"], r["split"], *r["triple"],
                r["target_sentence"], r["produced_sentence"],
                " ".join(r["produced_phonemes"]), int(r["truncated"]),
                int(r["unmatched"]), r["f1"], r["edit_norm"]]
               for r in rows], h)


def run_generate(checkpoint_path, out_dir, scene_ids: list | None = None) -> Path:
    payload = load_checkpoint(checkpoint_path)
    cfg, model = model_from_checkpoint(payload)
    out, h = _prepare_out(cfg, out_dir)
    dataset = load_or_build_dataset(cfg)
    dataset.train_ids = payload["meta"]["train_ids"]
    dataset.test_ids = payload["meta"]["test_ids"]
    if scene_ids is None:
        indices = list(range(len(dataset.samples)))
    else:
        by_name = {s.scene_id: i for i, s in enumerate(dataset.samples)}
        indices = []
        for sid in scene_ids:
            if sid in by_name:
                indices.append(by_name[sid])
            else:
                try:
                    indices.append(int(sid))
                except ValueError:
                    raise DataError(f"unknown scene id {sid!r}")
    rows = produce_for_scenes(model, dataset, indices)
    _generation_csv(out, "generations.csv", rows, h)
    return out


def evaluate_model(model: MultiModalModel, dataset: SceneDataset,
                   split: str = "all") -> dict:
    """Scores and context-space statistics for the requested split."""
    splits = ("train", "test") if split == "all" else (split,)
    result: dict = {"splits": {}}
    all_rows = []
    for sp in splits:
        indices = dataset.subset(sp)
        if not indices:
            continue
        rows = produce_for_scenes(model, dataset, indices)
        all_rows.extend(rows)
        f1 = float(np.mean([r["f1"] for r in rows]))
        ed = float(np.mean([r["edit_norm"] for r in rows]))
        result["splits"][sp] = {"f1": f1, "edit_norm": ed, "rows": rows}
    if {"train", "test"} <= set(result["splits"]):
        result["f1_mixed"] = mixed(result["splits"]["train"]["f1"],
                                   result["splits"]["test"]["f1"])
        result["edit_mixed"] = mixed(result["splits"]["train"]["edit_norm"],
                                     result["splits"]["test"]["edit_norm"])
    result["rows"] = all_rows

    # context-space statistics on the actually produced abstractions
    indices = [r["index"] for r in all_rows]
    actions = [dataset.samples[i].triple[0] for i in indices]
    s_pat, v_pat, a_pat = [], [], []
    for i in indices:
        sample = dataset.samples[i]
        s_csc, v_csc = abstract_percepts(model, sample.proprio.data,
                                         sample.vision.data)
        s_pat.append(s_csc)
        v_pat.append(v_csc)
        a_pat.append(associator_forward(model, s_csc, v_csc))
    patterns = {"somatosensory": np.asarray(s_pat),
                "visual": np.asarray(v_pat),
                "auditory": np.asarray(a_pat)}
    result["patterns"] = patterns
    result["actions"] = actions
    result["cluster"] = {}
    if len(set(actions)) >= 2 and len(actions) >= 4:
        for tag in ("somatosensory", "visual"):
            pats = patterns[tag]
            result["cluster"][tag] = {
                "d_inter": d_inter(pats, actions),
                "d_intra": d_intra(pats, actions),
                "d_avg": d_avg(pats),
                "d_rel": d_rel(pats),
            }
    return result


def run_eval(checkpoint_path, out_dir, split: str = "all") -> Path:
    payload = load_checkpoint(checkpoint_path)
    cfg, model = model_from_checkpoint(payload)
    out, h = _prepare_out(cfg, out_dir)
    dataset = load_or_build_dataset(cfg)
    dataset.train_ids = payload["meta"]["train_ids"]
    dataset.test_ids = payload["meta"]["test_ids"]
    result = evaluate_model(model, dataset, split)

    _generation_csv(out, "generations.csv", result["rows"], h)

    metric_rows = []
    for sp, vals in result["splits"].items():
        metric_rows.append(["f1", sp, vals["f1"]])
        metric_rows.append(["edit_norm", sp, vals["edit_norm"]])
    if "f1_mixed" in result:
        metric_rows.append(["f1", "mixed", result["f1_mixed"]])
        metric_rows.append(["edit_norm", "mixed", result["edit_mixed"]])
    for tag, stats in result["cluster"].items():
        for name, value in stats.items():
            metric_rows.append([f"{name}_{tag}", split, value])

    pca_rows = []
    for tag, pats in result["patterns"].items():
        proj = pca_project(pats, k=2)
        metric_rows.append([f"pca_explained_1_{tag}", split,
                            float(proj.explained[0])])
        metric_rows.append([f"pca_explained_2_{tag}", split,
                            float(proj.explained[1])
                            if proj.explained.shape[0] > 1 else 0.0])
        for row, scene_row in zip(proj.coords, result["rows"]):
            pca_rows.append([tag, scene_row["scene_id"], scene_row["split"],
                             *scene_row["triple"],
                             float(row[0]), float(row[1])])
    write_csv(out / "final_metrics.csv", ["metric", "split", "value"],
              metric_rows, h)
    write_csv(out / "pca_coords.csv",
              ["net", "scene_id", "split", "action", "colour", "object",
               "pc1", "pc2"], pca_rows, h)
    return out


def run_export(checkpoint_path, out_dir) -> Path:
    """Plot-ready CSVs of the stored context patterns of a checkpoint."""
    payload = load_checkpoint(checkpoint_path)
    cfg, model = model_from_checkpoint(payload)
    out, h = _prepare_out(cfg, out_dir)
    dataset = load_or_build_dataset(cfg)
    train_ids = payload["meta"]["train_ids"]

    pattern_rows, pca_rows = [], []
    max_csc = max(getattr(model, t).topology.csc_count for t in _NET_TAGS)
    for tag in _NET_TAGS:
        net: ModalityNet = getattr(model, tag)
        proj = pca_project(net.store.values, k=2)
        for row_i, idx in enumerate(train_ids):
            sample = dataset.samples[idx]
            vals = [float(v) for v in net.store.values[row_i]]
            vals += [""] * (max_csc - len(vals))
            pattern_rows.append([tag, sample.scene_id, *sample.triple] + vals)
            pca_rows.append([tag, sample.scene_id, "train", *sample.triple,
                             float(proj.coords[row_i, 0]),
                             float(proj.coords[row_i, 1])])
    write_csv(out / "csc_patterns.csv",
              ["net", "scene_id", "action", "colour", "object"]
              + [f"csc_{i}" for i in range(max_csc)], pattern_rows, h)
    write_csv(out / "pca_coords.csv",
              ["net", "scene_id", "split", "action", "colour", "object",
               "pc1", "pc2"], pca_rows, h)
    return out


# ---------------------------------------------------------------------------
# Parameter sweep


_SWEEP_ALIASES = {
    "psi_s": ("model.somatosensory_hyper.psi",),
    "psi_v": ("model.visual_hyper.psi",),
    "alpha": ("model.auditory_hyper.alpha",),
    "tau_cs": ("model.auditory.tau_cs", "model.somatosensory.tau_cs",
               "model.visual.tau_cs"),
}

DEFAULT_PSI_S_GRID = [1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2]


def _sweep_paths(parameter: str) -> tuple[str, ...]:
    if parameter in _SWEEP_ALIASES:
        return _SWEEP_ALIASES[parameter]
    if "." in parameter:
        return (parameter,)
    raise ConfigError(
        f"unknown sweep parameter {parameter!r}; use one of "
        f"{sorted(_SWEEP_ALIASES)} or a dotted config path")


def _cell_config(cfg: ExperimentConfig, parameter: str, value) -> ExperimentConfig:
    overrides = [f"{path}={json.dumps(value)}"
                 for path in _sweep_paths(parameter)]
    return apply_overrides(cfg, overrides)


def _run_sweep_cell(args) -> tuple[str, dict]:
    base_dict, parameter, value, seed_i, fold, cell_path = args
    cell_file = Path(cell_path)
    if cell_file.exists():
        return cell_file.name, json.loads(cell_file.read_text())
    cfg = _cell_config(config_from_dict(base_dict), parameter, value)
    model_seed = derive_seed(cfg.seed, 401, seed_i)
    dataset_seed = cfg.seed if fold == 0 else derive_seed(cfg.seed, 301, fold)
    model, dataset, reports = train_pipeline(cfg, model_seed=model_seed,
                                             dataset_seed=dataset_seed)
    result = evaluate_model(model, dataset, "all")
    record = {
        "parameter": parameter,
        "value": value,
        "seed_index": seed_i,
        "fold": fold,
        "f1_train": result["splits"]["train"]["f1"],
        "f1_test": result["splits"]["test"]["f1"],
        "f1_mixed": result["f1_mixed"],
        "edit_train": result["splits"]["train"]["edit_norm"],
        "edit_test": result["splits"]["test"]["edit_norm"],
        "edit_mixed": result["edit_mixed"],
        "epochs_auditory": reports["auditory"].epochs_run,
        "converged_auditory": reports["auditory"].converged,
    }
    for tag in ("somatosensory", "visual"):
        if tag in result["cluster"]:
            record[f"d_inter_{tag}"] = result["cluster"][tag]["d_inter"]
            record[f"d_intra_{tag}"] = result["cluster"][tag]["d_intra"]
    tmp = cell_file.with_suffix(".tmp")
    tmp.write_text(json.dumps(record, sort_keys=True))
    tmp.replace(cell_file)
    return cell_file.name, record


def run_sweep(cfg: ExperimentConfig, out_dir, parameter: str, grid: list,
              seeds: int = 10, folds: int = 1, jobs: int = 1) -> Path:
    """Cross-product sweep with resumable per-cell result files.

    Finished cells (their JSON files) are reused as-is on reruns, so an
    interrupted sweep picks up where it stopped.
    """
    _sweep_paths(parameter)  # validate early
    out, h = _prepare_out(cfg, out_dir)
    cells_dir = out / "cells"
    cells_dir.mkdir(exist_ok=True)
    base_dict = config_to_dict(cfg)

    tasks = []
    for value in grid:
        for seed_i in range(seeds):
            for fold in range(folds):
                name = f"{parameter}_{value:g}_s{seed_i}_f{fold}.json"
                tasks.append((base_dict, parameter, value, seed_i, fold,
                              str(cells_dir / name)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = [r for _, r in pool.map(_run_sweep_cell, tasks)]
    else:
        records = [_run_sweep_cell(t)[1] for t in tasks]

    metric_names = ["f1_train", "f1_test", "f1_mixed", "edit_train",
                    "edit_test", "edit_mixed", "d_inter_somatosensory",
                    "d_intra_somatosensory"]
    rows = []
    for value in grid:
        cell = [r for r in records if r["value"] == value]
        row = [parameter, value, len(cell)]
        for name in metric_names:
            vals = np.array([r[name] for r in cell if name in r],
                            dtype=np.float64)
            if vals.size == 0:
                row += ["", ""]
            else:
                stderr = (float(vals.std(ddof=1) / np.sqrt(vals.size))
                          if vals.size > 1 else 0.0)
                row += [float(vals.mean()), stderr]
        rows.append(row)
    header = ["parameter", "value", "cells"]
    for name in metric_names:
        header += [f"{name}_mean", f"{name}_stderr"]
    write_csv(out / "sweep.csv", header, rows, h)
    return out
