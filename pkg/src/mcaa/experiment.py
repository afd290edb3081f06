"""Experiment configs and the train / score / evaluate / sweep workflows.

A config is one JSON document. Values are resolved in the order
built-in defaults < preset < config file < command-line flags, and the
resolved document (including the seed) is written into every output file
as a provenance header, so any output can be fed back as ``--config`` to
regenerate it.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as D
from .errors import DomainError, UndefinedMetricError
from .evaluation import CONVENTIONS, UncertaintyRecords, evaluate, roc_auc
from .neural import init_model, load_model, model_to_dict
from .samplers import score_testset
from .training import TrainConfig, train

log = logging.getLogger(__name__)

HEADER_PREFIX = "# mcaa-provenance: "

DEFAULTS = {
    "dataset": {"kind": "synthetic", "n": 12000, "std": 0.25, "label_noise": None,
                "split": {"mode": "random", "ratios": [0.7, 0.1, 0.2]}},
    "widths": [20, 20],
    "train": {"learning_rate": 0.01, "epochs": 100, "batch_size": 512,
              "class_weights": [1.0, 1.0], "dropout_rate": None},
    "method": "mcaa",
    "mcaa": {"eps_max": 5e-3, "beta": None, "assumed_label": 0},
    "mcdropout": {"passes": 50, "dropout_rate": 0.3},
    "n_thresholds": 101,
    "seed": 0,
}

PRESETS = {
    "synthetic": {},
    "elliptic": {
        "dataset": {"kind": "elliptic", "features": "data/elliptic_txs_features.csv",
                    "classes": "data/elliptic_txs_classes.csv", "split": {"mode": "temporal"}},
        "widths": [100, 81],
        "train": {"learning_rate": 0.01, "epochs": 50, "batch_size": 0,
                  "class_weights": [0.3, 0.7]},
        "mcaa": {"eps_max": 0.1, "assumed_label": 0},
    },
    "ethereum": {
        "dataset": {"kind": "ethereum", "path": "data/transaction_dataset.csv",
                    "preprocess": {"corr_cutoff": 0.9, "min_unique": 10, "fill_missing": None},
                    "split": {"mode": "random", "ratios": [0.7, 0.1, 0.2]}},
        "widths": [50, 25],
        "train": {"learning_rate": 0.01, "epochs": 50, "batch_size": 512,
                  "class_weights": [0.4, 0.6]},
        "mcaa": {"eps_max": 8.1e-4, "assumed_label": 0},
    },
}

SWEEP_DEFAULT = [5e-3, 1e-2, 5e-2, 0.1, 0.2, 0.5, 1.0]


def merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def read_provenance(path) -> dict | None:
    """Provenance block of an output file, or None for a plain config."""
    text = Path(path).read_text()
    if text.startswith(HEADER_PREFIX):
        return json.loads(text.splitlines()[0][len(HEADER_PREFIX):])
    doc = json.loads(text)
    return doc.get("provenance") if isinstance(doc, dict) else None


def load_config_file(path) -> tuple[dict, dict]:
    """``(config, extra_args)`` from a config JSON or any output file carrying provenance."""
    prov = read_provenance(path)
    if prov is not None:
        return prov["config"], prov.get("args", {})
    return json.loads(Path(path).read_text()), {}


def resolve_config(file_config: dict | None = None, preset: str | None = None,
                   **overrides) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if preset:
        if preset not in PRESETS:
            raise DomainError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg = merge(cfg, PRESETS[preset])
    if file_config:
        cfg = merge(cfg, file_config)
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "eps_max":
            cfg["mcaa"]["eps_max"] = value
        else:
            cfg[key] = value
    if cfg["train"].get("dropout_rate") is None:
        cfg["train"]["dropout_rate"] = (
            cfg["mcdropout"]["dropout_rate"] if cfg["method"] == "mcdropout" else 0.0
        )
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    widths = cfg["widths"]
    if len(widths) != 2 or any(int(w) != w or w < 1 for w in widths):
        raise DomainError(f"widths must be two positive integers, got {widths}")
    if cfg["method"] not in ("mcaa", "mcdropout"):
        raise DomainError(f"method must be 'mcaa' or 'mcdropout', got {cfg['method']!r}")
    if cfg["method"] == "mcaa":
        eps = cfg["mcaa"]["eps_max"]
        if eps is None or not eps > 0:
            raise DomainError(f"mcaa needs eps_max > 0, got {eps}")
        beta = cfg["mcaa"].get("beta")
        if beta is not None and not 0 < beta <= eps:
            raise DomainError(f"beta must lie in (0, eps_max], got {beta}")
        if cfg["mcaa"]["assumed_label"] not in (0, 1):
            raise DomainError("assumed_label must be 0 or 1")
    elif int(cfg["mcdropout"]["passes"]) < 2:
        raise DomainError("mcdropout passes must be >= 2")
    train_config(cfg)
    if cfg["dataset"]["kind"] not in ("synthetic", "csv", "elliptic", "ethereum"):
        raise DomainError(f"unknown dataset kind {cfg['dataset']['kind']!r}")


def train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(learning_rate=t["learning_rate"], epochs=t["epochs"],
                       batch_size=t["batch_size"], class_weights=tuple(t["class_weights"]),
                       dropout_rate=t["dropout_rate"], seed=derive_seed(cfg["seed"], "train"))


def derive_seed(seed: int, purpose: str) -> int:
    digest = hashlib.sha256(f"{seed}:{purpose}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:12]


# -- data ----------------------------------------------------------------------

@dataclass
class Splits:
    train: D.Dataset
    val: D.Dataset
    test: D.Dataset
    raw_test: D.Dataset
    stats: D.StandardizerStats
    report: list[dict] = field(default_factory=list)


def load_dataset(cfg: dict) -> tuple[D.Dataset, list[dict]]:
    ds_cfg = cfg["dataset"]
    kind = ds_cfg["kind"]
    report: list[dict] = []
    if kind == "synthetic":
        ds = D.gen_synthetic_2d(ds_cfg["n"], ds_cfg["std"], derive_seed(cfg["seed"], "data"))
        noise = ds_cfg.get("label_noise")
        if noise:
            ds, _ = D.flip_labels_near_boundary(ds, noise["halfwidth"], noise["fraction"],
                                                derive_seed(cfg["seed"], "noise"))
    elif kind == "csv":
        ds, dropped = D.load_csv(ds_cfg["path"], ds_cfg["label_column"], ds_cfg.get("feature_columns"),
                                 ds_cfg.get("timestep_column"))
        if dropped:
            report.append({"rows_dropped": dropped, "reason": "missing or non-binary label"})
    elif kind == "elliptic":
        ds = D.load_elliptic(ds_cfg["features"], ds_cfg["classes"])
    else:
        ds, report = D.load_ethereum(ds_cfg["path"], ds_cfg.get("label_column", "FLAG"))
        pp = ds_cfg.get("preprocess") or {}
        ds, more = D.preprocess_ethereum(ds, pp.get("corr_cutoff", 0.9), pp.get("min_unique", 10),
                                         pp.get("fill_missing"))
        report += more
    return ds, report


def prepare(cfg: dict) -> Splits:
    ds, report = load_dataset(cfg)
    split = cfg["dataset"].get("split", {"mode": "random"})
    if split["mode"] == "temporal":
        tr, va, te = D.split_temporal_elliptic(ds)
    else:
        tr, va, te = D.split_random(ds, split.get("ratios", (0.7, 0.1, 0.2)),
                                    derive_seed(cfg["seed"], "split"))
    constant = [i for i in range(tr.features.shape[1]) if np.ptp(tr.features[:, i]) == 0] if len(tr) else []
    if constant:
        keep = [i for i in range(tr.features.shape[1]) if i not in constant]
        report += [{"column": tr.feature_names[i], "reason": "zero variance on train split"}
                   for i in constant]
        tr, va, te = (d.select_columns(keep) for d in (tr, va, te))
    stats = D.standardize_fit(tr)
    return Splits(D.standardize_apply(stats, tr), D.standardize_apply(stats, va),
                  D.standardize_apply(stats, te), te, stats, report)


# -- output helpers ------------------------------------------------------------

def provenance(command: str, cfg: dict, args: dict | None = None) -> dict:
    return {"command": command, "config": cfg, "seed": cfg["seed"], "args": args or {}}


def header_line(prov: dict) -> str:
    return HEADER_PREFIX + json.dumps(prov, sort_keys=True) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path: Path, prov: dict, columns: list[str], rows, force: bool = False) -> Path:
    buf = io.StringIO()
    buf.write(header_line(prov))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return _write(path, buf.getvalue(), force)


def write_json(path: Path, doc: dict, force: bool = False) -> Path:
    return _write(path, json.dumps(doc, indent=1, sort_keys=True) + "\n", force)


def _write(path: Path, text: str, force: bool) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def read_csv_table(path) -> tuple[dict | None, list[dict]]:
    lines = Path(path).read_text().splitlines()
    prov = None
    if lines and lines[0].startswith(HEADER_PREFIX):
        prov = json.loads(lines[0][len(HEADER_PREFIX):])
    body = [l for l in lines if not l.startswith("#")]
    return prov, list(csv.DictReader(body))


def run_dir(out: Path, cfg: dict) -> Path:
    return Path(out) / config_hash(cfg)


# -- workflows -----------------------------------------------------------------

def cmd_train(cfg: dict, out: Path, force: bool = False) -> dict:
    """Train the base network; writes ``model.json`` and ``loss_history.csv``."""
    splits = prepare(cfg)
    d = run_dir(out, cfg)
    model = init_model(splits.train.features.shape[1], cfg["widths"],
                       cfg["train"]["dropout_rate"], derive_seed(cfg["seed"], "init"))
    model, history = train(model, splits.train, splits.val, train_config(cfg))
    model = model.with_standardizer(splits.stats.mean, splits.stats.std)
    prov = provenance("train", cfg)
    doc = model_to_dict(model)
    doc["feature_names"] = list(splits.train.feature_names)
    doc["preprocessing_report"] = splits.report
    doc["provenance"] = prov
    model_path = write_json(d / "model.json", doc, force)
    hist_path = write_csv(d / "loss_history.csv", prov, ["epoch", "train_loss", "val_loss"],
                          ([i, tr, "" if va is None else va] for i, tr, va in history.rows()), force)
    log.info("final train loss %.6g", history.train[-1])
    return {"run_dir": d, "model": model_path, "loss_history": hist_path,
            "final_train_loss": history.train[-1]}


def _score(model, ds: D.Dataset, cfg: dict):
    if cfg["method"] == "mcaa":
        p = cfg["mcaa"]
        return score_testset(model, ds.features, "mcaa", eps_max=p["eps_max"], beta=p.get("beta"),
                             assumed_label=p["assumed_label"])
    return score_testset(model, ds.features, "mcdropout", passes=int(cfg["mcdropout"]["passes"]),
                         seed=derive_seed(cfg["seed"], "mcdropout"))


def _check_model(model, splits: Splits, cfg: dict) -> None:
    if model.input_dim != splits.test.features.shape[1]:
        raise DomainError(f"model expects {model.input_dim} features, dataset has "
                          f"{splits.test.features.shape[1]}")
    if cfg["method"] == "mcdropout" and model.dropout_rate <= 0:
        raise DomainError("mcdropout scoring needs a model trained with dropout_rate > 0")


def cmd_score(cfg: dict, model_path, out: Path, split: str = "test", force: bool = False) -> dict:
    """Score a split; writes ``scores.csv`` and ``scores_meta.json``."""
    splits = prepare(cfg)
    model = load_model(model_path)
    _check_model(model, splits, cfg)
    ds = getattr(splits, split)
    table = _score(model, ds, cfg)
    d = run_dir(out, cfg)
    prov = provenance("score", cfg, {"model": str(model_path), "split": split})
    rows = ([i, int(y), int(p), pm[1], mi]
            for i, (y, p, pm, mi) in enumerate(zip(ds.labels, table.predicted, table.p_mean, table.mi)))
    scores = write_csv(d / "scores.csv", prov,
                       ["point_index", "true_label", "predicted_label", "p_mean_class1", "mi"], rows, force)
    meta = dict(table.meta, split=split, n_points=len(table), provenance=prov)
    meta_path = write_json(d / "scores_meta.json", meta, force)
    return {"run_dir": d, "scores": scores, "meta": meta_path, "table": table}


def cmd_evaluate(scores_path, out: Path | None = None, n_thresholds: int | None = None,
                 force: bool = False) -> dict:
    """Write curves.csv, roc.csv, pr.csv and summary.json for a scores file.

    When ROC/PR are undefined (every prediction correct, or every one wrong)
    the curves and summary are still written and the result carries
    ``errors``; the CLI turns that into a nonzero exit status.
    """
    src_prov, rows = read_csv_table(scores_path)
    cfg = (src_prov or {}).get("config", {})
    if n_thresholds is None:
        n_thresholds = cfg.get("n_thresholds", 101)
    if not rows:
        raise DomainError(f"{scores_path} holds no scores")
    records = UncertaintyRecords(
        [int(r["predicted_label"]) for r in rows],
        [int(r["true_label"]) for r in rows],
        [float(r["mi"]) for r in rows],
    )
    table = evaluate(records, n_thresholds)
    d = Path(out) if out is not None else Path(scores_path).parent
    prov = {"command": "evaluate", "config": cfg, "seed": cfg.get("seed"),
            "args": {"scores": str(scores_path), "n_thresholds": n_thresholds}}
    paths = {"curves": write_csv(d / "curves.csv", prov, ["t_u", "accuracy", "npv", "tpr"],
                                 zip(table.t_u, table.accuracy, table.npv, table.tpr), force)}
    if table.roc is not None:
        paths["roc"] = write_csv(d / "roc.csv", prov, ["fpr", "tpr"], table.roc, force)
    if table.pr is not None:
        paths["pr"] = write_csv(d / "pr.csv", prov, ["recall", "precision"], table.pr, force)
    method = cfg.get("method")
    summary = {
        "method": method,
        "auroc": table.auroc,
        "aupr": table.aupr,
        "n_test": len(records),
        "n_incorrect": int(records.incorrect.sum()),
        "conventions": CONVENTIONS,
        "hyperparameters": {k: cfg[k] for k in ("widths", "train", method) if k in cfg},
        "errors": table.errors,
        "provenance": prov,
    }
    paths["summary"] = write_json(d / "summary.json", summary, force)
    return {"run_dir": d, **paths, "summary": summary, "errors": table.errors}


def _dedupe(values) -> list[float]:
    return sorted({float(v) for v in values})


def select_eps_max(results: list[tuple[float, float | None]]) -> float:
    """Highest validation AUROC wins; ties go to the smaller eps_max."""
    valid = [(e, a) for e, a in results if a is not None]
    if not valid:
        raise UndefinedMetricError("validation AUROC undefined for every candidate eps_max")
    best = max(a for _, a in valid)
    return min(e for e, a in valid if a == best)


def sweep_eps_max(model, val: D.Dataset, candidates, beta_ratio: float = 0.1,
                  assumed_label: int = 0) -> tuple[list[tuple[float, float | None]], float]:
    """Validation AUROC of MC-AA for each candidate eps_max and the selected value."""
    results = []
    for eps in _dedupe(candidates):
        if not eps > 0:
            raise DomainError(f"eps_max candidates must be positive, got {eps}")
        t = score_testset(model, val.features, "mcaa", eps_max=eps, beta=eps * beta_ratio,
                          assumed_label=assumed_label)
        try:
            auc = roc_auc(UncertaintyRecords(t.predicted, val.labels, t.mi))[1]
        except UndefinedMetricError:
            auc = None
        results.append((eps, auc))
    return results, select_eps_max(results)


def cmd_sweep_epsmax(cfg: dict, model_path, candidates, out: Path, force: bool = False) -> dict:
    splits = prepare(cfg)
    model = load_model(model_path)
    _check_model(model, splits, dict(cfg, method="mcaa"))
    if len(splits.val) == 0:
        raise DomainError("eps_max sweep needs a non-empty validation split")
    beta = cfg["mcaa"].get("beta")
    ratio = 0.1 if beta is None else beta / cfg["mcaa"]["eps_max"]
    results, best = sweep_eps_max(model, splits.val, candidates, ratio, cfg["mcaa"]["assumed_label"])
    prov = provenance("sweep-epsmax", cfg, {"model": str(model_path),
                                            "eps_max": _dedupe(candidates)})
    d = run_dir(out, cfg)
    table = write_csv(d / "sweep.csv", prov, ["eps_max", "val_auroc"],
                      ([e, "" if a is None else a] for e, a in results), force)
    sel = write_json(d / "sweep_selection.json", {"selected_eps_max": best, "provenance": prov}, force)
    return {"run_dir": d, "sweep": table, "selection": sel, "selected": best, "results": results}


def cmd_synth_demo(cfg: dict, out: Path, force: bool = False) -> dict:
    """Synthetic run end to end plus ``pointcloud.csv`` of (x1, x2, mi, label)."""
    if cfg["dataset"]["kind"] != "synthetic":
        raise DomainError("synth-demo runs on the synthetic dataset only")
    trained = cmd_train(cfg, out, force)
    scored = cmd_score(cfg, trained["model"], out, "test", force)
    evaluated = cmd_evaluate(scored["scores"], force=force)
    splits = prepare(cfg)
    table = scored["table"]
    prov = provenance("synth-demo", cfg)
    cloud = write_csv(trained["run_dir"] / "pointcloud.csv", prov, ["x1", "x2", "mi", "label"],
                      ([x[0], x[1], mi, int(y)] for x, mi, y in
                       zip(splits.raw_test.features, table.mi, splits.raw_test.labels)), force)
    return {**trained, **{k: v for k, v in scored.items() if k != "table"},
            **{k: v for k, v in evaluated.items() if k != "run_dir"}, "pointcloud": cloud}
