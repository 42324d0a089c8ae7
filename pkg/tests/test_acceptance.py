"""Acceptance gate: eleven numbered criteria, one test and one verdict line each.

Every test prints `criterion NN: PASS|FAIL -- <measured numbers>` before its
assertions so the record survives a failure. Tolerances are pinned here and
nowhere else; loosening one is a contract change, not a bug fix.

Criterion 9 trains nine small networks and dominates the module's runtime
(around five minutes); everything else finishes in well under a minute.
"""

import json
import time

import numpy as np

from waveforensics.classifier import (
    Model,
    ModelConfig,
    TrainConfig,
    backward,
    bce_loss,
    build_model,
    forward,
    load_model,
    predict,
    save_model,
    train,
)
from waveforensics.cli import REFERENCE_NOTE, main
from waveforensics.datasets import (
    AugmentConfig,
    DatasetItem,
    SplitSpec,
    SynthConfig,
    assign_splits,
    build_synth_dataset,
    make_loader,
)
from waveforensics.errors import WeightCorruptionError, WeightFormatError
from waveforensics.imaging import Domain
from waveforensics.metrics import auc, average_precision, roc_curve
from waveforensics.wavelets import (
    BoundaryMode,
    dwt1d,
    dwt2d,
    filter_bank,
    idwt2d,
)

import pytest


def _verdict(number: int, ok: bool, detail: str) -> None:
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} -- {detail}")


# ------------------------------------------------------------ criterion 1

def test_criterion_01_reference_constants_documented():
    """Full-scale results live in the comparison documentation as constants.

    They are not reproducible at desk scale (they need the full face
    dataset and a large backbone), so the contract is documentation: the
    comparison output must carry all nine reference numbers.
    """
    expected = ("81.5", "93.8", "95.1",
                "0.85", "0.96", "0.97",
                "0.802", "0.872", "0.886")
    missing = [tok for tok in expected if tok not in REFERENCE_NOTE]
    ok = not missing and "not reproducible" in REFERENCE_NOTE
    _verdict(1, ok, f"missing tokens: {missing or 'none'}")
    assert ok


# ------------------------------------------------------------ criterion 2

def test_criterion_02_round_trip_thousand_planes():
    rng = np.random.default_rng(2002)
    start = time.perf_counter()
    worst = 0.0
    combos = [(w, m) for w in ("haar", "db2")
              for m in (BoundaryMode.PERIODIZATION, BoundaryMode.SYMMETRIC)]
    for _ in range(1000):
        plane = rng.standard_normal((64, 64))
        for name, mode in combos:
            fb = filter_bank(name)
            back = idwt2d(dwt2d(plane, fb, mode), fb, mode)
            worst = max(worst, float(np.max(np.abs(back - plane))))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-9 and elapsed < 30.0
    _verdict(2, ok, f"max abs error {worst:.3e}, {elapsed:.1f}s for 4000 round trips")
    assert worst < 1e-9
    assert elapsed < 30.0


# ------------------------------------------------------------ criterion 3

def test_criterion_03_parseval_periodization():
    rng = np.random.default_rng(2003)
    worst = 0.0
    for _ in range(100):
        plane = rng.standard_normal((64, 64))
        for name in ("haar", "db2"):
            quad = dwt2d(plane, filter_bank(name), BoundaryMode.PERIODIZATION)
            coeff_energy = sum(float(np.sum(p * p)) for p in quad.planes())
            energy = float(np.sum(plane * plane))
            worst = max(worst, abs(coeff_energy - energy) / energy)
    ok = worst < 1e-9
    _verdict(3, ok, f"max relative energy mismatch {worst:.3e}")
    assert ok


# ------------------------------------------------------------ criterion 4

def test_criterion_04_filter_identities():
    worst = 0.0
    for name in ("haar", "db2"):
        fb = filter_bank(name)
        lo = np.asarray(fb.dec_lo)
        hi = np.asarray(fb.dec_hi)
        worst = max(worst, abs(lo.sum() - np.sqrt(2.0)))
        worst = max(worst, abs(np.sum(lo * lo) - 1.0))
        if lo.size > 2:  # shift-2 orthogonality is trivial for haar
            worst = max(worst, abs(float(np.dot(lo[:-2], lo[2:]))))
        qmf = (-1.0) ** np.arange(lo.size) * lo[::-1]
        worst = max(worst, float(np.max(np.abs(hi - qmf))))
    s3 = np.sqrt(3.0)
    closed = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / (4 * np.sqrt(2.0))
    worst = max(worst, float(np.max(np.abs(
        np.asarray(filter_bank("db2").dec_lo) - closed
    ))))
    ok = worst < 1e-12
    _verdict(4, ok, f"worst identity residual {worst:.3e}")
    assert ok


# ------------------------------------------------------------ criterion 5

def test_criterion_05_vanishing_moments():
    worst_const = 0.0
    for mode in (BoundaryMode.PERIODIZATION, BoundaryMode.SYMMETRIC):
        _, detail = dwt1d(np.full(256, 3.7), filter_bank("haar"), mode)
        worst_const = max(worst_const, float(np.max(np.abs(detail))))

    ramp = np.linspace(-2.0, 5.0, 256)
    _, detail = dwt1d(ramp, filter_bank("db2"), BoundaryMode.SYMMETRIC)
    worst_ramp = float(np.max(np.abs(detail[2:-2])))  # interior only

    ok = worst_const < 1e-12 and worst_ramp < 1e-9
    _verdict(5, ok, f"haar|const {worst_const:.3e}, db2|ramp interior {worst_ramp:.3e}")
    assert worst_const < 1e-12
    assert worst_ramp < 1e-9


# ------------------------------------------------------------ criterion 6

def test_criterion_06_gradient_check():
    start = time.perf_counter()
    model = build_model(
        ModelConfig(input_side=8, channels_per_block=(2,), seed=6), dtype=np.float64
    )
    rng = np.random.default_rng(2006)
    x = rng.random((2, 8, 8, 3))
    y = np.array([1.0, 0.0])
    grads = backward(model, x, y)

    def loss_at(params):
        return bce_loss(forward(Model(model.config, params, np.float64), x), y)

    step = 1e-5
    worst = 0.0
    for name, grad in grads.items():
        flat = model.params[name].ravel()
        for idx in range(flat.size):
            plus = {k: v.copy() for k, v in model.params.items()}
            plus[name].ravel()[idx] += step
            minus = {k: v.copy() for k, v in model.params.items()}
            minus[name].ravel()[idx] -= step
            numeric = (loss_at(plus) - loss_at(minus)) / (2 * step)
            analytic = grad.ravel()[idx]
            scale = max(abs(numeric), abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / scale)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 60.0
    _verdict(6, ok, f"max relative gradient error {worst:.3e}, {elapsed:.1f}s")
    assert worst < 1e-4
    assert elapsed < 60.0


# ------------------------------------------------------------ criterion 7

def test_criterion_07_auc_and_ap_match_oracles():
    rng = np.random.default_rng(2007)
    mismatches = 0
    for _ in range(500):
        n = int(rng.integers(2, 201))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        # coarse grid forces heavy ties, including cross-class ones
        scores = rng.integers(0, 6, size=n) / 5.0

        curve = roc_curve(labels, scores)
        pos = scores[labels == 1]
        neg = scores[labels == 0]
        greater = int(np.sum(pos[:, None] > neg[None, :]))
        ties = int(np.sum(pos[:, None] == neg[None, :]))
        oracle_auc = (2 * greater + ties) / (2 * pos.size * neg.size)

        n_pos = int(labels.sum())
        oracle_ap = 0.0
        prev_tp = 0
        for s in sorted(set(scores.tolist()), reverse=True):
            taken = scores >= s
            tp = int(np.sum(labels[taken]))
            fp = int(np.sum(taken)) - tp
            if tp > prev_tp:
                oracle_ap += ((tp - prev_tp) / n_pos) * (tp / (tp + fp))
            prev_tp = tp

        if auc(curve) != oracle_auc:
            mismatches += 1
        if average_precision(labels, scores) != oracle_ap:
            mismatches += 1
    ok = mismatches == 0
    _verdict(7, ok, f"{mismatches} bit-level mismatches in 500 tie-heavy sets")
    assert ok


# ------------------------------------------------------------ criterion 8

def test_criterion_08_split_exactness():
    items = [DatasetItem(source=f"img_{i}", label=i % 2) for i in range(10000)]
    bad = []
    for seed in range(10):
        splits = assign_splits(items, SplitSpec(0.70, 0.15, 0.15, seed=seed))
        counts = {name: splits.count(name) for name in ("train", "val", "test")}
        per_label = {
            name: sum(1 for s, it in zip(splits, items)
                      if s == name and it.label == 1)
            for name in ("train", "val", "test")
        }
        if counts != {"train": 7000, "val": 1500, "test": 1500}:
            bad.append((seed, counts))
        if per_label != {"train": 3500, "val": 750, "test": 750}:
            bad.append((seed, per_label))
    ok = not bad
    _verdict(8, ok, f"off-target splits: {bad or 'none'} over 10 seeds")
    assert ok


# ------------------------------------------------------------ criterion 9

def _protocol_auc(master: int, domain_name: str, cache: dict) -> float:
    """One train/eval run of the pinned desk-scale protocol."""
    if master not in cache:
        items, store = build_synth_dataset(500, SynthConfig(), master)
        splits = assign_splits(items, SplitSpec(0.6, 0.2, 0.2, seed=master + 1))
        groups = {"train": [], "val": [], "test": []}
        for item, split in zip(items, splits):
            groups[split].append(item)
        cache[master] = (groups, make_loader(store))
    groups, loader = cache[master]

    domain = Domain.parse(domain_name)
    model = build_model(
        ModelConfig(input_side=64, channels_per_block=(8, 16, 32), seed=master + 2)
    )
    tcfg = TrainConfig(learning_rate=1e-4, batch_size=32, max_epochs=20,
                       seed=master + 3)
    best, _ = train(model, groups["train"], groups["val"], tcfg, domain, loader,
                    augment_cfg=AugmentConfig())
    scores = predict(best, groups["test"], domain, loader)
    labels = np.array([item.label for item in groups["test"]])
    return auc(roc_curve(labels, scores))


@pytest.mark.slow
def test_criterion_09_desk_scale_rank_order():
    """Three seeds, three domains, median test AUC comparison.

    The pinned requirements: median AUC(db2) >= 0.90, a margin of at
    least 0.05 over spatial, and the rank db2 >= haar > spatial, all
    inside a 15 minute budget.
    """
    start = time.perf_counter()
    cache: dict = {}
    results = {name: [] for name in ("spatial", "haar", "db2")}
    for master in (0, 1, 2):
        for name in results:
            results[name].append(_protocol_auc(master, name, cache))
    elapsed = time.perf_counter() - start

    med = {name: float(np.median(vals)) for name, vals in results.items()}
    margin = med["db2"] - med["spatial"]
    clauses = {
        "db2 >= 0.90": med["db2"] >= 0.90,
        "margin >= 0.05": margin >= 0.05,
        "db2 >= haar": med["db2"] >= med["haar"],
        "haar > spatial": med["haar"] > med["spatial"],
        "runtime < 15 min": elapsed < 900.0,
    }
    detail = (
        f"median AUC spatial {med['spatial']:.4f} haar {med['haar']:.4f} "
        f"db2 {med['db2']:.4f}, margin {margin:+.4f}, {elapsed:.0f}s; "
        + ", ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in clauses.items())
    )
    _verdict(9, all(clauses.values()), detail)
    failures = [k for k, v in clauses.items() if not v]
    assert not failures, f"unmet clauses: {failures} ({detail})"


# ------------------------------------------------------------ criterion 10

def test_criterion_10_compare_is_deterministic(tmp_path):
    cfg = {
        "side": 16,
        "n_per_class": 8,
        "augment": False,
        "model": {"channels_per_block": [4, 8]},
        "train": {"max_epochs": 2},
    }
    cfg_path = tmp_path / "cmp.json"
    cfg_path.write_text(json.dumps(cfg))
    outs = (tmp_path / "first", tmp_path / "second")
    for out in outs:
        code = main(["compare", "--config", str(cfg_path), "--seed", "17",
                     "--out", str(out), "--quiet"])
        assert code == 0

    differing = []
    names = ["compare.csv"]
    names += [f"{d}/history.csv" for d in ("spatial", "haar", "db2")]
    names += [f"{d}/report.json" for d in ("spatial", "haar", "db2")]
    for name in names:
        if (outs[0] / name).read_bytes() != (outs[1] / name).read_bytes():
            differing.append(name)
    ok = not differing
    _verdict(10, ok, f"byte-differing outputs: {differing or 'none'}")
    assert ok


# ------------------------------------------------------------ criterion 11

def test_criterion_11_weight_file_round_trip(tmp_path):
    model = build_model(
        ModelConfig(input_side=16, channels_per_block=(4, 8), seed=11)
    )
    path = tmp_path / "model.wgfd"
    save_model(model, path, train_seed=3)
    loaded = load_model(path)

    exact = all(
        np.array_equal(loaded.params[name], model.params[name])
        and loaded.params[name].dtype == model.params[name].dtype
        for name in model.params
    ) and loaded.config == model.config

    rejected = {}
    original = path.read_bytes()

    flipped = bytearray(original)
    flipped[len(flipped) // 2] ^= 0x01
    (tmp_path / "flipped.wgfd").write_bytes(bytes(flipped))
    try:
        load_model(tmp_path / "flipped.wgfd")
        rejected["corrupted"] = False
    except WeightCorruptionError:
        rejected["corrupted"] = True

    bumped = bytearray(original)
    bumped[4] = 2
    (tmp_path / "bumped.wgfd").write_bytes(bytes(bumped))
    try:
        load_model(tmp_path / "bumped.wgfd")
        rejected["version-bumped"] = False
    except WeightFormatError:
        rejected["version-bumped"] = True

    ok = exact and all(rejected.values())
    _verdict(11, ok, f"round trip exact: {exact}, rejections: {rejected}")
    assert exact
    assert all(rejected.values())
