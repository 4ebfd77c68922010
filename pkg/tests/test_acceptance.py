"""End-to-end acceptance checks, one test per numbered criterion.

The sinusoid model is trained once per session at full size (several minutes
on one core); the boundary studies train one autoencoder and 30 classifiers
per dataset. The terminal summary lists one PASS/FAIL line per criterion.

Criterion 10 needs user-supplied MFCC-style data: point FEATAUG_DIGITS_CONFIG
at an experiment YAML with ``data.kind: csv`` to enable it.
"""

import csv
import filecmp
import os
import time
from pathlib import Path

import numpy as np
import pytest
import yaml

from feataug import experiments as ex
from feataug.augment import CoarseIndex, add_noise, extrapolate, interpolate, knn_in_class
from feataug.autoencoder import AutoencoderModel, loss_and_grads
from feataug.checkpoint import load_checkpoint
from feataug.cli import main
from feataug.config import config_from_dict
from feataug.studies import extrapolation_check, interpolation_sweep, pick_pairs
from feataug.tensor import RandomStream

from .gradcheck import finite_difference, max_relative_error

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
LAMBDAS = [i / 10 for i in range(11)]


def raw_config(name: str, out_dir) -> dict:
    raw = yaml.safe_load((CONFIGS / f"{name}.yaml").read_text())
    raw["out_dir"] = str(out_dir)
    raw["threads"] = 1
    return raw


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# shared trained sinusoid model


@pytest.fixture(scope="module")
def sinusoids(tmp_path_factory):
    out = tmp_path_factory.mktemp("sinusoids")
    cfg = config_from_dict(raw_config("sinusoids", out)).validate()
    t0 = time.time()
    res = ex.cmd_train_sa(cfg, out)
    minutes = (time.time() - t0) / 60
    ckpt = load_checkpoint(res["checkpoint"])
    prep = ex.preprocess(cfg, *ex.raw_data(cfg, RandomStream(cfg.seed)), ckpt.norm)
    pairs = pick_pairs(prep.train, 5, RandomStream(cfg.seed).child("pairs"))
    return {"cfg": cfg, "out": out, "res": res, "ckpt": ckpt, "minutes": minutes,
            "seqs": [s.values for s in prep.train], "pairs": pairs}


# ---------------------------------------------------------------------------


@pytest.mark.criterion(1, "analytic BPTT gradients match central differences")
def test_gradient_exactness(record_property):
    t0 = time.time()
    m = AutoencoderModel.create(2, 4, RandomStream(0), dropout=0.2)
    rng = np.random.default_rng(0)
    for p in m.params().values():
        p += rng.normal(0.0, 0.5, p.shape)
    batch = rng.normal(size=(3, 5, 2))
    worst = 0.0
    for train in (False, True):
        loss_fn = lambda: loss_and_grads(m, batch, True, train, RandomStream(7))[0]
        _, g = loss_and_grads(m, batch, True, train, RandomStream(7))
        worst = max(worst, max_relative_error(g, finite_difference(loss_fn, m.params())))
    elapsed = time.time() - t0
    record_property("detail", f"max rel err {worst:.2e}, {elapsed:.1f}s")
    assert worst < 1e-4
    assert elapsed < 60


@pytest.mark.criterion(2, "operator algebra identities and noise variance")
def test_operator_algebra(record_property):
    rng = np.random.default_rng(2)
    for _ in range(200):
        cj, ck = rng.normal(size=(2, 16)) * rng.uniform(0.01, 100)
        lam = float(rng.uniform(0, 3))
        assert np.array_equal(interpolate(cj, ck, 0.0), cj)
        assert np.array_equal(interpolate(cj, ck, 1.0), ck)
        assert np.array_equal(extrapolate(cj, ck, 0.0), cj)
        assert np.array_equal(extrapolate(cj, ck, lam), interpolate(cj, ck, -lam, check_range=False))
    assert np.array_equal(interpolate([0.0, 0.0], [2.0, 4.0], 0.5), [1.0, 2.0])

    c = rng.normal(size=4)
    sigma = np.array([0.1, 1.0, 3.0, 0.5])
    assert np.array_equal(add_noise(c, sigma, 0.0, RandomStream(0)), c)
    assert np.array_equal(add_noise(c, np.zeros(4), 0.5, RandomStream(0)), c)
    gamma = 0.5
    s = RandomStream(5)
    draws = np.stack([add_noise(c, sigma, gamma, s) for _ in range(100_000)])
    ratio = draws.var(axis=0) / (gamma * sigma) ** 2
    worst = float(np.max(np.abs(ratio - 1.0)))
    record_property("detail", f"worst variance deviation {100 * worst:.2f}%")
    assert worst < 0.05


@pytest.mark.criterion(3, "accelerated kNN equals brute force")
def test_knn_oracle(record_property):
    rng = np.random.default_rng(3)
    X = rng.normal(size=(1000, 64))
    labels = np.zeros(1000, dtype=int)
    d = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    index = CoarseIndex(X, labels, RandomStream(3))
    mismatches = 0
    for k in (1, 10):
        for q in range(len(X)):
            others = np.flatnonzero(np.arange(len(X)) != q)
            oracle = others[np.lexsort((others, d[q, others]))][:k]
            fast = index.query(q, k)
            brute = knn_in_class(X, labels, q, k)
            mismatches += int(not np.array_equal(fast, oracle)) + int(not np.array_equal(brute, oracle))
    record_property("detail", f"{mismatches} mismatches over 2000 queries")
    assert mismatches == 0


@pytest.mark.slow
@pytest.mark.criterion(4, "sinusoid reconstruction MSE < 0.01 on held-out data")
def test_sinusoid_reconstruction(sinusoids, record_property):
    s = sinusoids
    rt = ex.cmd_roundtrip(s["cfg"], s["res"]["checkpoint"], s["out"], "test")
    record_property("detail", f"held-out MSE {rt['aggregate']:.5f} over {len(rt['rows'])} sequences, "
                              f"trained in {s['minutes']:.1f} min")
    assert len(rt["rows"]) == s["cfg"].data.test_count
    assert rt["aggregate"] < 0.01


@pytest.mark.slow
def test_sinusoid_validation_loss_falls_tenfold(sinusoids):
    hist = sinusoids["res"]["history"]
    assert hist[0].val_loss >= 10 * min(h.val_loss for h in hist)


@pytest.mark.slow
@pytest.mark.criterion(5, "interpolation sweep is smooth and sinusoidal")
def test_interpolation_smoothness(sinusoids, record_property):
    s = sinusoids
    sw = interpolation_sweep(s["ckpt"].model, s["seqs"], s["pairs"][0], LAMBDAS, s["ckpt"].reverse)
    record_property("detail", "distances " + " ".join(f"{d:.2f}" for d in sw.distances)
                    + f", worst fit residual {sw.worst_residual():.3f}")
    assert len(sw.curves) == 11
    assert sw.monotone(slack=0.05)
    assert sw.worst_residual() < 0.1


@pytest.mark.slow
@pytest.mark.criterion(6, "extrapolation exaggerates parent amplitude")
def test_extrapolation_exaggeration(sinusoids, record_property):
    s = sinusoids
    checks = [extrapolation_check(s["ckpt"].model, s["seqs"], p, 0.5, s["ckpt"].reverse)
              for p in s["pairs"]]
    ok = [c.passes(slack=0.02) for c in checks]
    record_property("detail", f"{sum(ok)}/{len(ok)} pairs; " + "; ".join(
        f"{c.a_lo:.2f}->{c.a_lo_child:.2f} {c.a_hi:.2f}->{c.a_hi_child:.2f}" for c in checks))
    assert len(checks) >= 5
    assert all(ok)


def boundary_direction(kind: str, m: dict) -> bool:
    base = m["baseline"]
    if kind == "spirals":
        return m["extrapolation"] < base and m["interpolation"] >= base - 0.5
    return m["interpolation"] <= base and m["extrapolation"] >= base - 0.5


@pytest.mark.slow
@pytest.mark.criterion(7, "extrapolation helps only on the complex boundary")
def test_boundary_complexity_direction(tmp_path, record_property):
    verdicts, parts = {}, []
    for kind in ("spirals", "circles", "linear"):
        cfg = config_from_dict(raw_config(kind, tmp_path / kind)).validate()
        assert cfg.runs >= 10
        res = ex.cmd_classify(cfg, cfg.out_dir)
        log_rows = read_rows(res["train_log"])
        assert {int(r["updates"]) for r in log_rows} == {cfg.classifier.train.updates}
        means = {v: r.mean for v, r in res["results"].items()}
        verdicts[kind] = boundary_direction(kind, means)
        parts.append(f"{kind}: base {means['baseline']:.2f} interp {means['interpolation']:.2f} "
                     f"extrap {means['extrapolation']:.2f}")
    record_property("detail", "; ".join(parts))
    assert all(verdicts.values()), verdicts


@pytest.mark.criterion(8, "augmented training uses exactly the baseline update count")
def test_budget_parity_doubled_dataset(tmp_path, record_property):
    raw = raw_config("spirals", tmp_path)
    # one neighbour per sample doubles the training set
    raw["augment"]["k"] = 1
    raw["sa_train"]["updates"] = 50
    raw["classifier"]["train"]["updates"] = 137
    raw["runs"] = 2
    cfg = config_from_dict(raw).validate()
    res = ex.cmd_classify(cfg, tmp_path)
    rows = read_rows(res["train_log"])
    base = {r["run"]: r for r in rows if r["variant"] == "baseline"}
    aug = [r for r in rows if r["variant"] != "baseline"]
    record_property("detail", f"baseline n={base['0']['n_train']}, augmented n={aug[0]['n_train']}, "
                              f"updates {sorted({r['updates'] for r in rows})}")
    assert aug
    for r in aug:
        b = base[r["run"]]
        assert int(r["n_train"]) == 2 * int(b["n_train"])
        assert int(r["updates"]) == int(b["updates"]) == 137


def _tree_identical(a: Path, b: Path) -> tuple[int, list[str]]:
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    other = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    if files != other:
        return len(files), ["file lists differ"]
    return len(files), [str(f) for f in files if not filecmp.cmp(a / f, b / f, shallow=False)]


@pytest.mark.criterion(9, "identical config and seed give byte-identical outputs")
def test_determinism(tmp_path, record_property):
    sin = raw_config("sinusoids", tmp_path)
    sin["data"]["sinusoids"].update(count=60, length=30)
    sin["data"]["test_count"] = 10
    sin["autoencoder"]["hidden"] = 8
    sin["sa_train"].update(updates=60, batch_size=8)
    spi = raw_config("spirals", tmp_path)
    spi["sa_train"]["updates"] = 40
    spi["classifier"]["train"]["updates"] = 60
    spi["runs"] = 3
    for name, raw in (("sin.yaml", sin), ("spi.yaml", spi)):
        (tmp_path / name).write_text(yaml.safe_dump(raw))

    for rep in ("a", "b"):
        out = tmp_path / rep
        cfg_sin, cfg_spi = str(tmp_path / "sin.yaml"), str(tmp_path / "spi.yaml")
        common = ["--threads", "1"]
        assert main(["train-sa", "--config", cfg_sin, "--out-dir", str(out / "sa")] + common) == 0
        ckpt = str(out / "sa" / "checkpoint.bin")
        assert main(["roundtrip", "--config", cfg_sin, "--checkpoint", ckpt,
                     "--out-dir", str(out / "rt")] + common) == 0
        for op in ("interpolate", "extrapolate", "noise"):
            assert main(["sweep", "--config", cfg_sin, "--checkpoint", ckpt, "--operator", op,
                         "--out-dir", str(out / f"sweep-{op}")] + common) == 0
        assert main(["classify", "--config", cfg_spi, "--out-dir", str(out / "cls")] + common) == 0

    n, diff = _tree_identical(tmp_path / "a", tmp_path / "b")
    record_property("detail", f"{n} files compared, {len(diff)} differ")
    assert n > 0 and not diff, diff


@pytest.mark.slow
@pytest.mark.criterion(10, "digits ordering: extrapolation < baseline < random interpolation")
def test_digits_variant_ordering(tmp_path, record_property):
    path = os.environ.get("FEATAUG_DIGITS_CONFIG")
    if not path:
        pytest.skip("set FEATAUG_DIGITS_CONFIG to an experiment YAML over MFCC CSV data")
    raw = yaml.safe_load(Path(path).read_text())
    raw.update(out_dir=str(tmp_path), threads=raw.get("threads", 1), runs=10,
               variants=["baseline", "extrapolation", "random-interpolation"])
    cfg = config_from_dict(raw).validate()
    res = ex.cmd_classify(cfg, tmp_path)
    m = {v: r.mean for v, r in res["results"].items()}
    record_property("detail", " ".join(f"{v} {e:.2f}" for v, e in m.items()))
    assert m["extrapolation"] < m["baseline"] < m["random-interpolation"]
