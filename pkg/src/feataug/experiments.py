"""End-to-end pipelines behind the command-line interface.

Each ``cmd_*`` function takes a validated :class:`ExperimentConfig`, writes
its outputs under an output directory and returns the written paths (plus
whatever numbers the caller may want to inspect). All randomness flows from
``cfg.seed`` through named sub-streams.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from .analysis import fit_sinusoid
from .augment import (AugmentConfig, add_noise, augment_dataset, extrapolate, interpolate,
                      interpolated_length, stack_synthetics)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .classifier import EvalResult, MLPModel, evaluate, stratified_folds, train_classifier
from .config import VARIANTS, ExperimentConfig
from .datasets import (GlobalNorm, SequenceSample, fit_global_norm, gen_boundary_dataset,
                       gen_sinusoids, load_csv_sequences, normalize_local, points_to_samples,
                       write_csv_sequences)
from .optim import TrainResult, dataset_loss, train_autoencoder, write_loss_log
from .svg import line_plot
from .tensor import InsufficientDataError, ParameterError, RandomStream, per_element_std

log = logging.getLogger(__name__)


class ExperimentError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# data


@dataclass
class Prepared:
    train: list[SequenceSample]
    test: list[SequenceSample]
    norm: GlobalNorm | None


def raw_data(cfg: ExperimentConfig, root: RandomStream):
    """Train and test samples before any preprocessing."""
    d = cfg.data
    data_stream = root.child("data")
    if d.kind == "sinusoids":
        train = gen_sinusoids(d.sinusoids, data_stream.child("train"))
        test = gen_sinusoids(replace(d.sinusoids, count=d.test_count), data_stream.child("test"))
    elif d.kind == "boundary":
        X, y = gen_boundary_dataset(d.boundary, data_stream.child("train"))
        Xt, yt = gen_boundary_dataset(replace(d.boundary, samples_per_class=d.test_count),
                                      data_stream.child("test"))
        train, test = points_to_samples(X, y), points_to_samples(Xt, yt)
    else:
        train = load_csv_sequences(d.train_path)
        test = load_csv_sequences(d.test_path) if d.test_path else []
    return train, test


def preprocess(cfg: ExperimentConfig, train, test, norm: GlobalNorm | None = None) -> Prepared:
    if cfg.data.local_center:
        train = [normalize_local(s) for s in train]
        test = [normalize_local(s) for s in test]
    if cfg.data.global_norm:
        norm = norm or fit_global_norm(train)
        train, test = norm.apply(train), norm.apply(test)
    return Prepared(train, test, norm if cfg.data.global_norm else None)


def prepare_data(cfg: ExperimentConfig, root: RandomStream | None = None) -> Prepared:
    root = root or RandomStream(cfg.seed)
    return preprocess(cfg, *raw_data(cfg, root))


# ---------------------------------------------------------------------------
# autoencoder


def train_sa(cfg: ExperimentConfig, train: list[SequenceSample], root: RandomStream) -> TrainResult:
    if not train:
        raise InsufficientDataError("no training data")
    a = cfg.autoencoder
    model = ae.AutoencoderModel.create(train[0].n_features, a.hidden, root.child("sa"),
                                       dropout=a.dropout, context_dropout=a.context_dropout)
    return train_autoencoder(model, [s.values for s in train], cfg.sa_train, root.child("sa-train"))


def cmd_train_sa(cfg: ExperimentConfig, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    root = RandomStream(cfg.seed)
    prep = prepare_data(cfg, root)
    res = train_sa(cfg, prep.train, root)
    ckpt = Checkpoint(res.model, prep.norm, cfg.fingerprint(), cfg.sa_train.reverse)
    save_checkpoint(ckpt, out / "checkpoint.bin")
    write_loss_log(res.history, out / "loss_log.csv")
    return {"checkpoint": out / "checkpoint.bin", "loss_log": out / "loss_log.csv",
            "updates": res.updates, "history": res.history}


def reconstruction_report(ckpt: Checkpoint, samples: list[SequenceSample]):
    """Per-sample eval-mode reconstruction MSE, plus the pooled aggregate."""
    rows = []
    total, count = 0.0, 0
    ctx = ae.encode_sequences(ckpt.model, [s.values for s in samples], ckpt.reverse)
    dec = ae.decode_contexts(ckpt.model, ctx, [len(s) for s in samples])
    for s, y in zip(samples, dec):
        err = (y - s.values) ** 2
        rows.append((s.id, float(err.mean())))
        total += float(err.sum())
        count += err.size
    return rows, total / count


def cmd_roundtrip(cfg: ExperimentConfig, checkpoint, out_dir, split: str = "test") -> dict:
    ckpt = load_checkpoint(checkpoint)
    train, test = raw_data(cfg, RandomStream(cfg.seed))
    prep = preprocess(cfg, train, test, ckpt.norm)
    samples = prep.test if split == "test" and prep.test else prep.train
    rows, agg = reconstruction_report(ckpt, samples)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "roundtrip.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seq_id", "mse"])
        for sid, mse in rows:
            w.writerow([sid, repr(mse)])
        w.writerow(["aggregate", repr(agg)])
    return {"report": path, "rows": rows, "aggregate": agg}


# ---------------------------------------------------------------------------
# sweeps


def sweep_contexts(model, seqs, pair, operator: str, lambdas, reverse=True, gamma=0.5,
                   sigma=None, noise_draws=10, stream: RandomStream | None = None):
    """Synthetic contexts and target lengths for one parent pair.

    ``interpolate`` walks from parent j (lam=0) to parent k (lam=1);
    ``extrapolate`` pushes j away from k; ``noise`` perturbs j
    ``noise_draws`` times and ignores ``lambdas``.
    """
    j, k = pair
    # one sample at a time: BLAS may round differently for other batch sizes,
    # and the sweep endpoints must equal plain encode/decode of the parents
    cj = ae.encode(model, seqs[j], reverse)
    ck = ae.encode(model, seqs[k], reverse)
    lj, lk = len(seqs[j]), len(seqs[k])
    items = []
    if operator == "interpolate":
        n = interpolated_length(lj, lk)
        items = [(f"lam{lam:.2f}", interpolate(cj, ck, lam), n) for lam in lambdas]
    elif operator == "extrapolate":
        items = [(f"lam{lam:.2f}", extrapolate(cj, ck, lam), lj) for lam in lambdas]
    elif operator == "noise":
        if sigma is None:
            raise ParameterError("noise sweeps need the dataset's per-element sigma")
        stream = stream or RandomStream(0)
        items = [(f"draw{i:02d}", add_noise(cj, sigma, gamma, stream.child(i)), lj)
                 for i in range(noise_draws)]
    else:
        raise ParameterError(f"unknown operator {operator!r}")
    return items, (cj, ck)


def cmd_sweep(cfg: ExperimentConfig, checkpoint, out_dir, pair=None, operator=None,
              lambdas=None) -> dict:
    ckpt = load_checkpoint(checkpoint)
    root = RandomStream(cfg.seed)
    train, test = raw_data(cfg, root)
    prep = preprocess(cfg, train, test, ckpt.norm)
    samples = prep.train
    pair = tuple(pair or cfg.sweep.pair)
    operator = operator or cfg.sweep.operator
    lambdas = list(cfg.sweep.lambdas if lambdas is None else lambdas)
    ids = {s.id: i for i, s in enumerate(samples)}
    missing = [p for p in pair if p not in ids]
    if missing:
        raise ExperimentError(f"sample ids not found: {missing}")
    seqs = [s.values for s in samples]
    sigma = None
    if operator == "noise":
        sigma = per_element_std(ae.encode_sequences(ckpt.model, seqs, ckpt.reverse))
    items, _ = sweep_contexts(ckpt.model, seqs, (ids[pair[0]], ids[pair[1]]), operator, lambdas,
                              ckpt.reverse, cfg.augment.gamma, sigma, cfg.sweep.noise_draws,
                              root.child("sweep-noise"))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    decoded = [ae.decode(ckpt.model, c, n) for _, c, n in items]
    unnorm = (lambda v: ckpt.norm.invert(v)) if ckpt.norm is not None else (lambda v: v)
    files = []
    for (tag, _, _), y in zip(items, decoded):
        path = out / f"sweep_{operator}_{tag}.csv"
        y = unnorm(y)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"f{i}" for i in range(y.shape[1])])
            for t, row in enumerate(y):
                w.writerow([t] + [format(float(v), ".17g") for v in row])
        files.append(path)
    parents = [unnorm(seqs[ids[p]])[:, 0] for p in pair]
    curves = parents + [unnorm(y)[:, 0] for y in decoded]
    labels = [f"parent {p}" for p in pair] + [tag for tag, _, _ in items]
    svg_path = out / f"sweep_{operator}.svg"
    svg_path.write_text(line_plot(curves, labels, bold=(0, 1), title=f"{operator} sweep {pair}"))
    fits = [fit_sinusoid(unnorm(y)[:, 0]) for y in decoded] if decoded[0].shape[1] == 1 else []
    return {"csv": files, "svg": svg_path, "decoded": [unnorm(y) for y in decoded], "fits": fits}


# ---------------------------------------------------------------------------
# classification


def _label_index(train_labels):
    classes = sorted(set(train_labels), key=lambda v: (str(type(v)), v))
    return {c: i for i, c in enumerate(classes)}


def build_variant(variant: str, contexts, labels, lengths, aug: AugmentConfig,
                  stream: RandomStream, model=None, inputs=None, reverse=True):
    """Training contexts/labels for one variant (originals plus synthetics)."""
    if variant == "baseline":
        return contexts, labels
    template = VARIANTS[variant]
    cfg = replace(aug, operator=template.operator, policy=template.policy)
    if variant == "input-extrapolation":
        if inputs is None or len({len(s) for s in inputs}) != 1:
            raise ExperimentError("input-extrapolation needs equal-length sequences")
        flat = np.stack([s.reshape(-1) for s in inputs])
        syn = augment_dataset(flat, labels, lengths, cfg, stream)
        Xs, ys, _ = stack_synthetics(syn)
        shape = inputs[0].shape
        cs = ae.encode_sequences(model, [x.reshape(shape) for x in Xs], reverse)
    else:
        syn = augment_dataset(contexts, labels, lengths, cfg, stream)
        cs, ys, _ = stack_synthetics(syn)
    if len(cs) == 0:
        return contexts, labels
    return np.concatenate([contexts, cs]), np.concatenate([labels, ys.astype(labels.dtype)])


@dataclass
class RunRecord:
    variant: str
    run: int
    error: float
    updates: int
    n_train: int
    final_loss: float


def _one_run(args):
    cfg, run, ctx_tr, y_tr, len_tr, ctx_te, y_te, model, inputs, reverse, n_classes = args
    root = RandomStream(cfg.seed).child("run").child(run)
    out = []
    c = cfg.classifier
    for variant in cfg.variants:
        X, y = build_variant(variant, ctx_tr, y_tr, len_tr, cfg.augment, root.child("aug").child(variant),
                             model, inputs, reverse)
        mlp = MLPModel.create(X.shape[1], c.width, n_classes, root.child("init"), dropout=c.dropout)
        res = train_classifier(mlp, X, y, c.train, root.child("train").child(variant))
        err = evaluate(res.model, ctx_te, y_te)
        out.append(RunRecord(variant, run, err, res.updates, len(X), res.history[-1].train_loss))
    return out


def _map(fn, jobs, threads):
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def cmd_classify(cfg: ExperimentConfig, out_dir, checkpoint=None) -> dict:
    """Baseline vs. augmented classifiers under one shared update budget."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    root = RandomStream(cfg.seed)
    train_raw, test_raw = raw_data(cfg, root)
    if any(s.label is None for s in train_raw):
        raise ExperimentError("classification needs labelled data")
    records: list[RunRecord] = []

    def contexts_for(model, reverse, samples):
        return ae.encode_sequences(model, [s.values for s in samples], reverse)

    if cfg.folds is None:
        if not test_raw:
            raise ExperimentError("no test set; configure data.test_path or folds")
        if checkpoint is not None:
            ckpt = load_checkpoint(checkpoint)
            prep = preprocess(cfg, train_raw, test_raw, ckpt.norm)
            model, reverse = ckpt.model, ckpt.reverse
        else:
            prep = preprocess(cfg, train_raw, test_raw)
            model, reverse = train_sa(cfg, prep.train, root).model, cfg.sa_train.reverse
        index = _label_index([s.label for s in prep.train])
        ctx_tr = contexts_for(model, reverse, prep.train)
        ctx_te = contexts_for(model, reverse, prep.test)
        y_tr = np.array([index[s.label] for s in prep.train])
        y_te = np.array([index.get(s.label, -1) for s in prep.test])
        len_tr = np.array([len(s) for s in prep.train])
        inputs = [s.values for s in prep.train]
        jobs = [(cfg, r, ctx_tr, y_tr, len_tr, ctx_te, y_te, model, inputs, reverse, len(index))
                for r in range(cfg.runs)]
        for recs in _map(_one_run, jobs, cfg.threads):
            records.extend(recs)
    else:
        samples = train_raw + test_raw
        labels = [s.label for s in samples]
        folds = stratified_folds(np.array([str(v) for v in labels]), cfg.folds, root)
        for f, test_idx in enumerate(folds):
            test_set = set(test_idx.tolist())
            tr = [s for i, s in enumerate(samples) if i not in test_set]
            te = [samples[i] for i in test_idx]
            prep = preprocess(cfg, tr, te)
            fold_root = root.child("fold").child(f)
            model, reverse = train_sa(cfg, prep.train, fold_root).model, cfg.sa_train.reverse
            index = _label_index([s.label for s in prep.train])
            job = (cfg, f, contexts_for(model, reverse, prep.train),
                   np.array([index[s.label] for s in prep.train]),
                   np.array([len(s) for s in prep.train]),
                   contexts_for(model, reverse, prep.test),
                   np.array([index.get(s.label, -1) for s in prep.test]),
                   model, [s.values for s in prep.train], reverse, len(index))
            records.extend(_one_run(job))

    budget = cfg.classifier.train.updates
    bad = [r for r in records if r.updates != budget]
    if bad:
        raise ExperimentError(f"update budget violated: {bad[0]}")

    runs_path = out / "runs.csv"
    with open(runs_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "variant", "run", "error"])
        for r in records:
            w.writerow([cfg.name, r.variant, r.run, repr(r.error)])
    log_path = out / "train_log.csv"
    with open(log_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "variant", "run", "updates", "n_train", "final_train_loss"])
        for r in records:
            w.writerow([cfg.name, r.variant, r.run, r.updates, r.n_train, repr(r.final_loss)])
    summary: dict[str, EvalResult] = {}
    for v in cfg.variants:
        summary[v] = EvalResult.from_errors([r.error for r in records if r.variant == v])
    summary_path = out / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "variant", "mean_error", "std_error", "runs", "updates"])
        for v, res in summary.items():
            w.writerow([cfg.name, v, repr(res.mean), repr(res.std), res.runs, budget])
    return {"runs": runs_path, "summary": summary_path, "train_log": log_path,
            "results": summary, "records": records}


def cmd_gen_data(cfg: ExperimentConfig, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, test = raw_data(cfg, RandomStream(cfg.seed))
    paths = {"train": out / "train.csv"}
    write_csv_sequences(train, paths["train"])
    if test:
        paths["test"] = out / "test.csv"
        write_csv_sequences(test, paths["test"])
    return paths
