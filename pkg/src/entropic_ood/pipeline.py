"""End-to-end experiment steps; each CLI subcommand is a thin wrapper over one.

A run directory (``config["out"]``) holds::

    config.json  data/*.csv  checkpoint.json  checkpoint_softmax.json
    train_log.csv  calibration.json  report.csv  report.txt  plots/*.svg
"""

import concurrent.futures
import copy
import csv
import json
import logging
import os
from pathlib import Path

import numpy as np

from . import plots
from .calibration import calibrate_temperature
from .config import dump_config
from .data import gen_blobs, gen_ood_center, gen_ood_ring, gen_ood_uniform, load_csv, load_idx, split, write_csv
from .encoder import EncoderSpec
from .errors import ContractError, DataFormatError, UnsupportedError
from .evaluation import evaluate, mean_entropy, model_scores, score_sets
from .heads import LossConfig
from .metrics import EvalReport, accuracy, auroc
from .model import Model
from .scores import DEFAULT_SCORE
from .training import TrainRecipe, train

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
LOG_COLUMNS = ("epoch", "lr", "loss", "train_accuracy", "mean_normalized_entropy", "floor_hits", "grad_norm")


def run_dir(cfg):
    return Path(cfg["out"])


def checkpoint_paths(cfg):
    """``{head_name: path}`` for the configured head and the SoftMax baseline."""
    out = run_dir(cfg)
    kind = cfg["loss"]["kind"]
    paths = {kind: out / "checkpoint.json"}
    if cfg["eval"].get("baseline", True) and kind != "softmax":
        paths["softmax"] = out / "checkpoint_softmax.json"
    return paths


# -- data -------------------------------------------------------------------

def synthetic_sets(cfg):
    """Generate ``(train, val, test, {ood_name: dataset})`` in memory."""
    d, seed = cfg["data"], cfg["seed"]
    ds = gen_blobs(d["classes"], d["per_class"], d["dim"], d["spread"], seed,
                   center_radius=d["center_radius"], grid_shape=d.get("grid_shape"))
    train_set, val_set, test_set = split(ds, d["fractions"], seed)
    ood = {}
    makers = {
        "ring": lambda o, s: gen_ood_ring(o["count"], d["dim"], o["radius"], s),
        "uniform": lambda o, s: gen_ood_uniform(o["count"], d["dim"], o["half_width"], s),
        "center": lambda o, s: gen_ood_center(o["count"], d["dim"], o["spread"], s),
    }
    for i, (name, spec) in enumerate(sorted(d["ood"].items())):
        if name not in makers:
            raise ContractError(f"unknown synthetic OOD set {name!r}")
        ood[name] = makers[name](spec, seed * 1000 + 101 + i)
    return train_set, val_set, test_set, ood


def data_files(cfg):
    out = run_dir(cfg) / "data"
    names = {s: out / f"{s}.csv" for s in SPLITS}
    names.update({f"ood_{k}": out / f"ood_{k}.csv" for k in sorted(cfg["data"]["ood"])})
    return names


def generate(cfg):
    """Write the synthetic ID splits and OOD sets as CSV; returns the paths."""
    if cfg["data"]["source"] != "synthetic":
        raise ContractError("generate only applies to data.source = synthetic")
    files = data_files(cfg)
    files["train"].parent.mkdir(parents=True, exist_ok=True)
    train_set, val_set, test_set, ood = synthetic_sets(cfg)
    for name, ds in zip(SPLITS, (train_set, val_set, test_set)):
        write_csv(ds, files[name])
    for name, ds in ood.items():
        write_csv(ds, files[f"ood_{name}"])
    return files


def split_descriptors(cfg):
    d = cfg["data"]
    if d["source"] == "synthetic":
        return {k: str(v) for k, v in data_files(cfg).items() if k in SPLITS}
    if d["source"] == "csv":
        return {k: d["files"][k] for k in SPLITS if k in d["files"]}
    return {k: f"idx:{d['idx']['images']}#{k}" for k in SPLITS}


def load_sets(cfg):
    """Resolve ``(train, val, test, ood)`` for any data source."""
    d = cfg["data"]
    grid = tuple(d["grid_shape"]) if d.get("grid_shape") else None
    if d["source"] == "synthetic":
        files = data_files(cfg)
        if not all(p.exists() for p in files.values()):
            log.info("synthetic data missing under %s; generating", files["train"].parent)
            generate(cfg)
        sets = [load_csv(files[s], grid) for s in SPLITS]
        ood = {k: load_csv(files[f"ood_{k}"], grid) for k in sorted(d["ood"])}
        return (*sets, ood)
    if d["source"] == "csv":
        f = d.get("files") or {}
        missing = [s for s in SPLITS if s not in f]
        if missing:
            raise DataFormatError(f"data.files is missing {missing}")
        sets = [load_csv(f[s], grid) for s in SPLITS]
        ood = {k: load_csv(p, grid) for k, p in sorted(f.get("ood", {}).items())}
        return (*sets, ood)
    idx = d["idx"]
    full = load_idx(idx["images"], idx["labels"])
    sets = split(full, d["fractions"], cfg["seed"])
    ood = {k: load_idx(p) for k, p in sorted(idx.get("ood", {}).items())}
    return (*sets, ood)


# -- training ---------------------------------------------------------------

def build_model(cfg, kind, input_dim, num_classes, seed=None):
    enc = cfg["encoder"]
    spec = EncoderSpec(input_dim, tuple(enc["hidden_dims"]), enc["feature_dim"], enc["activation"])
    loss = cfg["loss"]
    loss_config = LossConfig(kind, loss["entropic_scale"], loss["alpha"])
    return Model.create(spec, loss_config, num_classes, cfg["seed"] if seed is None else seed)


def fit(cfg, kind, train_set, on_epoch=None):
    model = build_model(cfg, kind, train_set.features.shape[1], train_set.num_classes)
    history = train(model, train_set, TrainRecipe.from_dict(cfg["optim"]), cfg["seed"], on_epoch)
    return model, history


def write_log(history, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for row in history:
            w.writerow([format(row[c], ".17g") if isinstance(row[c], float) else row[c] for c in LOG_COLUMNS])


def train_run(cfg):
    """Train the configured head (and SoftMax baseline); write checkpoints."""
    out = run_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.json")
    train_set, _, _, _ = load_sets(cfg)
    models = {}
    for head, path in checkpoint_paths(cfg).items():
        log.info("training %s head", head)

        def report_epoch(row, head=head, last=cfg["optim"]["epochs"]):
            if row["epoch"] % 10 and row["epoch"] != last:
                return
            log.info("[%s] epoch %3d  loss %.5f  acc %.4f  norm-entropy %.4f", head, row["epoch"],
                     row["loss"], row["train_accuracy"], row["mean_normalized_entropy"])

        model, history = fit(cfg, head, train_set, report_epoch)
        model.extra["data_splits"] = split_descriptors(cfg)
        model.save(path)
        suffix = "" if path.name == "checkpoint.json" else "_" + head
        write_log(history, out / f"train_log{suffix}.csv")
        models[head] = model
    return models


def load_models(cfg):
    models = {}
    for head, path in checkpoint_paths(cfg).items():
        if not path.exists():
            raise DataFormatError(f"missing checkpoint {path}; run `train` first")
        models[head] = Model.load(path)
    return models


# -- calibration / evaluation ----------------------------------------------

def calibrate_run(cfg):
    """Fit the inference temperature of every checkpoint on the validation split."""
    models = load_models(cfg)
    _, val_set, _, _ = load_sets(cfg)
    bins = cfg["eval"]["ece_bins"]
    results = {}
    for head, model in models.items():
        if "val" not in model.extra.get("data_splits", {}):
            raise ContractError(f"{head} checkpoint has no validation split recorded")
        model.loss_config.inference_temperature = 1.0
        before = model.predict(val_set.features)
        result = calibrate_temperature(model.inference_logits(val_set.features), val_set.labels, bins)
        model.calibration = result
        model.loss_config.inference_temperature = result.temperature
        if not np.array_equal(before, np.argmax(model.predict_proba(val_set.features), axis=1)):
            raise ContractError("temperature scaling changed predictions")
        model.save(checkpoint_paths(cfg)[head])
        results[head] = result
    (run_dir(cfg) / "calibration.json").write_text(
        json.dumps({h: r.to_dict() for h, r in results.items()}, indent=2, sort_keys=True) + "\n")
    return results


def eval_run(cfg, models=None):
    models = models or load_models(cfg)
    _, _, test_set, ood = load_sets(cfg)
    report = EvalReport()
    for head, model in models.items():
        evaluate(model, test_set, ood, cfg["eval"]["scores"], cfg["eval"]["ece_bins"], head, report)
    out = run_dir(cfg)
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.txt").write_text(report.to_text())
    return report


def plot_run(cfg, models=None):
    models = models or load_models(cfg)
    _, _, test_set, ood = load_sets(cfg)
    pdir = run_dir(cfg) / "plots"
    pdir.mkdir(parents=True, exist_ok=True)
    bins = cfg["eval"]["ece_bins"]
    written = []
    for head, model in models.items():
        id_cache = score_sets(model, test_set)
        path = pdir / f"reliability_{head}.svg"
        path.write_text(plots.reliability_diagram(id_cache[2], test_set.labels, f"Reliability: {head}", bins))
        written.append(path)
        for score in cfg["eval"]["scores"]:
            try:
                id_scores = model_scores(model, test_set, score, id_cache)
            except UnsupportedError:
                continue
            for name, ds in ood.items():
                ood_scores = model_scores(model, ds, score)
                path = pdir / f"hist_{head}_{score}_{name}.svg"
                path.write_text(plots.score_histogram(id_scores, ood_scores, f"{head} / {score} / {name}"))
                written.append(path)
    return written


def pipeline(cfg):
    """generate (if synthetic) -> train -> calibrate -> eval -> plot."""
    if cfg["data"]["source"] == "synthetic":
        generate(cfg)
    train_run(cfg)
    calibrate_run(cfg)
    report = eval_run(cfg)
    plot_run(cfg)
    return report


# -- experiments ------------------------------------------------------------

ABLATION_COLUMNS = ("entropic_scale", "mean_entropy", "mean_normalized_entropy", "accuracy", "score")


def ablate_es(cfg, scales=None):
    """Train one model per entropic scale; returns a list of result dicts."""
    scales = scales or cfg["ablation"]["entropic_scales"]
    kind = cfg["ablation"]["kind"]
    train_set, _, test_set, ood = load_sets(cfg)
    score = DEFAULT_SCORE[kind]
    rows = []
    for es in scales:
        c = copy.deepcopy(cfg)
        c["loss"]["entropic_scale"] = float(es)
        model, _ = fit(c, kind, train_set)
        probs = model.predict_proba(test_set.features)
        h = mean_entropy(model, test_set)
        row = {"entropic_scale": float(es), "mean_entropy": h,
               "mean_normalized_entropy": h / np.log(model.num_classes),
               "accuracy": accuracy(probs, test_set.labels), "score": score}
        id_scores = model_scores(model, test_set, score)
        for name, ds in ood.items():
            row[f"auroc_{name}"] = auroc(id_scores, model_scores(model, ds, score))
        rows.append(row)
    out = run_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    columns = list(ABLATION_COLUMNS) + [f"auroc_{n}" for n in sorted(ood)]
    with open(out / "ablation_es.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format(r[c], ".17g") if isinstance(r[c], float) else r[c] for c in columns])
    lines = ["  ".join(f"{c:>14}" for c in columns)]
    for r in rows:
        lines.append("  ".join(f"{r[c]:>14.4f}" if isinstance(r[c], float) else f"{r[c]:>14}" for c in columns))
    (out / "ablation_es.txt").write_text("\n".join(lines) + "\n")
    return rows


def sweep(cfg, seeds=None, threads=None):
    """Run the full pipeline once per seed in ``out/seed_<k>``; write a summary.

    Seeds run in a thread pool capped by ``ENTROPIC_OOD_THREADS`` (default 1).
    """
    seeds = list(seeds or cfg["sweep"]["seeds"])
    threads = threads or int(os.environ.get("ENTROPIC_OOD_THREADS", "1"))
    base = run_dir(cfg)

    def one(seed):
        c = copy.deepcopy(cfg)
        c["seed"] = seed
        c["out"] = str(base / f"seed_{seed}")
        return seed, pipeline(c)

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        results = dict(pool.map(one, seeds))

    groups = {}
    for seed in seeds:
        for r in results[seed].rows:
            if r["status"] == "ok":
                groups.setdefault((r["head"], r["score"], r["ood_set"]), []).append(r)
    metrics = ("accuracy", "ece", "auroc", "aupr", "tnr_at_tpr95", "dtacc")
    base.mkdir(parents=True, exist_ok=True)
    with open(base / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["head", "score", "ood_set", "runs"] + [f"{m}_{s}" for m in metrics for s in ("mean", "std")])
        for key in sorted(groups):
            rows = groups[key]
            cells = []
            for m in metrics:
                v = np.array([r[m] for r in rows])
                cells += [format(float(v.mean()), ".17g"), format(float(v.std()), ".17g")]
            w.writerow([*key, len(rows), *cells])
    return results
