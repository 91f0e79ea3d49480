"""Acceptance suite: one test per criterion, one printed pass/fail line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines.  Every tolerance is pinned here; the synthetic presets and training
regimes come from :mod:`sclmetric.presets` and are fully deterministic, so
each criterion either always passes or always fails for a given codebase.
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from sclmetric import evaluation, losses, model, presets, training
from sclmetric.cli import main as cli_main
from sclmetric.dataset import (
    SplitSpec,
    gallery_probe_partition,
    generate_synthetic,
    save_embeddings,
    subject_split,
)
from sclmetric.evaluation import (
    VerificationReport,
    cmc_curve,
    evaluate_model,
    gar_at_far,
    identify,
    mean_inter_class_distance,
    rank_k_accuracy,
    repeated_evaluation,
)
from sclmetric.losses import SclConfig

from helpers import (
    away_from,
    central_difference,
    flatten_grads,
    flatten_params,
    relative_error,
    unflatten_params,
)
from test_evaluation import (
    oracle_cmc,
    oracle_gar_far,
    oracle_identify,
    oracle_mean_inter_class,
)

PAPER_MARGINS = SclConfig(alpha1=2.0, alpha2=3.1)
N_SEEDS = 5


def _line(criterion: int, ok: bool, detail: str) -> None:
    print(f"[acceptance] criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


# --- shared deterministic runs ------------------------------------------------


@pytest.fixture(scope="module")
def easy_runs():
    """Per seed: SCL training on the easy preset plus its held-out test set."""
    started = time.perf_counter()
    runs = []
    for seed in range(N_SEEDS):
        ds = generate_synthetic(presets.easy_synth_config(seed))
        train_ds, test_ds = subject_split(ds, SplitSpec(seed=seed), 0)
        cfg = presets.synthetic_regime(seed=seed)
        params, log = training.train(train_ds, cfg)
        runs.append({"seed": seed, "test_ds": test_ds, "cfg": cfg, "params": params, "log": log})
    return {"runs": runs, "seconds": time.perf_counter() - started}


@pytest.fixture(scope="module")
def hard_runs():
    """Per seed: SCL and CL trained on the hard preset under identical splits,
    seeds, and step budgets."""
    runs = []
    for seed in range(N_SEEDS):
        ds = generate_synthetic(presets.hard_synth_config(seed))
        train_ds, test_ds = subject_split(ds, SplitSpec(seed=seed), 0)
        trained = {}
        for loss in ("scl", "cl"):
            cfg = presets.synthetic_regime(loss, seed=seed)
            trained[loss], _ = training.train(train_ds, cfg)
        runs.append(
            {
                "seed": seed,
                "dim": ds.dimension,
                "hidden": presets.synthetic_regime(seed=seed).hidden_dims,
                "test_ds": test_ds,
                "trained": trained,
            }
        )
    return runs


def _rank1(params, test_ds, distractors=None) -> float:
    res = evaluate_model(params, test_ds, ranks=(1,), verification_pairs=5, distractors=distractors)
    return res.rank_accuracies[1]


# --- criterion 1: gradient correctness -----------------------------------------


def _fd_check_loss(loss_fn, slots, rng, tol, n_instances=100):
    worst = 0.0
    checked = 0
    while checked < n_instances:
        vectors = rng.normal(size=(len(slots), 8))
        result = loss_fn(*vectors)
        if result is None:  # instance rejected (hinge kink too close)
            continue
        lv = result
        for idx, slot in enumerate(slots):
            def f(x, idx=idx):
                perturbed = [v for v in vectors]
                perturbed[idx] = x
                return loss_fn(*perturbed).value

            err = relative_error(lv.gradient(slot), central_difference(f, vectors[idx]))
            worst = max(worst, err)
            assert err < tol
        checked += 1
    return worst


def test_criterion_1_gradient_correctness():
    started = time.perf_counter()
    rng = np.random.default_rng(1001)
    worst = {}

    worst["scl-intra"] = _fd_check_loss(
        lambda a, b, c: losses.scl_intra_loss(a, b, c), ("a", "b", "c"), rng, 1e-5
    )

    def inter(a, b, c):
        if not away_from(losses.squared_euclidean(a, b), [PAPER_MARGINS.alpha1]):
            return None
        if not away_from(losses.squared_euclidean(b, c), [PAPER_MARGINS.alpha2]):
            return None
        return losses.scl_inter_loss(a, b, c, PAPER_MARGINS)

    worst["scl-inter"] = _fd_check_loss(inter, ("a", "b", "c"), rng, 1e-5)

    def cl_with_label(label):
        def cl(a, b):
            dist = losses.euclidean_distance(a, b)
            if not away_from(dist, [2.0]) or dist < 1e-3:
                return None
            return losses.contrastive_loss(a, b, label, 2.0)

        return cl

    worst["cl"] = max(
        _fd_check_loss(cl_with_label(0), ("a", "b"), rng, 1e-5, n_instances=50),
        _fd_check_loss(cl_with_label(1), ("a", "b"), rng, 1e-5, n_instances=50),
    )

    def tl(a, p, n):
        arg = losses.squared_euclidean(a, p) - losses.squared_euclidean(a, n) + 0.4
        if not away_from(arg, [0.0]):
            return None
        return losses.triplet_loss(a, p, n, 0.4)

    worst["tl"] = _fd_check_loss(tl, ("a", "b", "c"), rng, 1e-5)

    # end-to-end: d(set loss)/d(every parameter) through a 2-layer net, 8-dim in
    def loss_through_net(m, xs, label):
        embeddings = {}
        traces = {}
        for slot, x in zip(("a", "b", "c"), xs):
            embeddings[slot], traces[slot] = model.forward(m, x)
        if label == 0:
            lv = losses.scl_intra_loss(embeddings["a"], embeddings["b"], embeddings["c"])
        else:
            lv = losses.scl_inter_loss(embeddings["a"], embeddings["b"], embeddings["c"], PAPER_MARGINS)
        grads = model.zero_gradients(m)
        for slot in ("a", "b", "c"):
            grads = model.add_gradients(grads, model.backward(m, traces[slot], lv.gradient(slot)))
        return lv.value, grads

    worst_net = 0.0
    checked = 0
    while checked < 100:
        m = model.init_model([8, 6, 4], seed=int(rng.integers(100_000)))
        xs = rng.normal(size=(3, 8))
        label = checked % 2
        clear = True
        for x in xs:
            _, trace = model.forward(m, x)
            for z in trace.preacts[:-1]:
                if np.abs(z).min() < 1e-3:
                    clear = False
        if label == 1:
            ea = model.forward(m, xs[0])[0]
            eb = model.forward(m, xs[1])[0]
            ec = model.forward(m, xs[2])[0]
            if not away_from(losses.squared_euclidean(ea, eb), [PAPER_MARGINS.alpha1]):
                clear = False
            if not away_from(losses.squared_euclidean(eb, ec), [PAPER_MARGINS.alpha2]):
                clear = False
        if not clear:
            continue
        _, analytic = loss_through_net(m, xs, label)

        def f(theta, m=m, xs=xs, label=label):
            return loss_through_net(unflatten_params(m, theta), xs, label)[0]

        fd = central_difference(f, flatten_params(m))
        err = relative_error(flatten_grads(analytic), fd)
        worst_net = max(worst_net, err)
        assert err < 1e-4
        checked += 1

    elapsed = time.perf_counter() - started
    ok = all(w < 1e-5 for w in worst.values()) and worst_net < 1e-4 and elapsed < 10.0
    _line(
        1,
        ok,
        f"100 instances/loss, worst rel err losses {max(worst.values()):.2e} (<1e-5), "
        f"through-net {worst_net:.2e} (<1e-4), {elapsed:.1f}s (<10s)",
    )
    assert ok


# --- criterion 2: closed-form identities ---------------------------------------


def test_criterion_2_closed_form_identities():
    v = np.array([0.3, -1.1, 2.0])
    coincident = losses.scl_inter_loss(v, v, v, PAPER_MARGINS)
    identity_ok = coincident.value == 5.1 == PAPER_MARGINS.alpha1 + PAPER_MARGINS.alpha2

    rng = np.random.default_rng(2002)
    a, b, c = rng.normal(size=(3, 6))

    class _Genuine:
        label = 0

    margin_free = True
    base = losses.scl_set_loss(_Genuine(), a, b, c, SclConfig(2.0, 3.1)).value
    for alpha1, alpha2 in ((0.1, 0.1), (5.0, 50.0), (123.0, 0.5)):
        got = losses.scl_set_loss(_Genuine(), a, b, c, SclConfig(alpha1, alpha2)).value
        margin_free = margin_free and got == base

    # hinge-inactive configurations: exactly zero value and gradient
    flat_ok = True
    inter = losses.scl_inter_loss([0.0, 0.0], [2.0, 0.0], [5.0, 0.0], PAPER_MARGINS)
    flat_ok &= inter.value == 0.0 and not any(g.any() for g in inter.gradients.values())
    cl = losses.contrastive_loss([0.0, 0.0], [3.0, 0.0], 1, 2.0)
    flat_ok &= cl.value == 0.0 and not any(g.any() for g in cl.gradients.values())
    tl = losses.triplet_loss([0.0, 0.0], [0.0, 0.0], [1.0, 0.0], 0.4)
    flat_ok &= tl.value == 0.0 and not any(g.any() for g in tl.gradients.values())

    ok = identity_ok and margin_free and flat_ok
    _line(
        2,
        ok,
        f"coincident inter = {coincident.value} (= alpha1+alpha2 = 5.1), "
        f"genuine set margin-independent: {margin_free}, inactive hinges flat: {flat_ok}",
    )
    assert ok


# --- criterion 3: oracle equivalence -------------------------------------------


def test_criterion_3_oracle_equivalence():
    started = time.perf_counter()
    rng = np.random.default_rng(3003)
    mismatches = 0
    for _ in range(25):
        n_subjects = int(rng.integers(2, 31))
        dim = int(rng.integers(2, 17))
        gallery = [(sid, rng.normal(size=dim)) for sid in range(n_subjects)]
        probes = [
            (int(rng.integers(n_subjects)), rng.normal(size=dim))
            for _ in range(int(rng.integers(2, 2 * n_subjects + 2)))
        ]

        rankings = []
        for sid, p in probes:
            ranked = identify(p, gallery)
            if ranked != oracle_identify(p, gallery):
                mismatches += 1
            rankings.append((sid, ranked))

        curve = cmc_curve(rankings)
        if list(curve.values) != oracle_cmc(rankings):
            mismatches += 1
        for k in (1, min(5, n_subjects), n_subjects):
            if rank_k_accuracy(curve, k) != oracle_cmc(rankings)[k - 1]:
                mismatches += 1

        genuine = tuple(rng.uniform(0, 2, size=20).tolist())
        imposter = tuple(rng.uniform(0, 2, size=20).tolist())
        for target in (0.05, 0.1, 0.5, 1.0):
            entry = gar_at_far(VerificationReport(genuine, imposter), [target]).gar_at_far[0]
            if (entry.threshold, entry.achieved_far, entry.gar) != oracle_gar_far(
                genuine, imposter, target
            ):
                mismatches += 1

        icd_probes = [(int(rng.integers(n_subjects)), rng.normal(size=dim)) for _ in range(n_subjects)]
        ident = model.identity_model(dim)
        got = mean_inter_class_distance(gallery, icd_probes, ident, normalize=False)
        if got != oracle_mean_inter_class(gallery, icd_probes):
            mismatches += 1

    elapsed = time.perf_counter() - started
    ok = mismatches == 0 and elapsed < 30.0
    _line(
        3,
        ok,
        f"25 instances (<=30 subjects, <=16 dims), {mismatches} oracle mismatches "
        f"(exact equality), {elapsed:.1f}s (<30s)",
    )
    assert ok


# --- criterion 4: training descent ---------------------------------------------


def test_criterion_4_training_descent(easy_runs):
    drops = []
    rank1s = []
    for run in easy_runs["runs"]:
        log = run["log"]
        first, last = log.entries[0].mean_genuine, log.entries[-1].mean_genuine
        drops.append(1.0 - last / first)
        rank1s.append(_rank1(run["params"], run["test_ds"]))
    elapsed = easy_runs["seconds"]
    ok = all(d >= 0.5 for d in drops) and all(r >= 0.90 for r in rank1s) and elapsed < 120.0
    _line(
        4,
        ok,
        f"genuine-loss drop {min(drops):.1%}..{max(drops):.1%} (>=50% in 5/5 seeds), "
        f"held-out rank-1 min {min(rank1s):.2f} (>=0.90), {elapsed:.1f}s (<2min)",
    )
    assert ok


# --- criterion 5: trend reproduction (subclass loss vs contrastive) -------------


def test_criterion_5_scl_vs_cl_trend(hard_runs):
    wins = 0
    detail = []
    for run in hard_runs:
        r1_scl = _rank1(run["trained"]["scl"], run["test_ds"])
        r1_cl = _rank1(run["trained"]["cl"], run["test_ds"])
        wins += r1_scl >= r1_cl
        detail.append(f"{r1_scl:.2f}/{r1_cl:.2f}")
    ok = wins >= 4
    _line(
        5,
        ok,
        f"hard preset, scl>=cl rank-1 in {wins}/5 seeds (need >=4) [scl/cl: {' '.join(detail)}] "
        "(trend check, not a point estimate)",
    )
    assert ok


# --- criterion 6: inter-class separation trend ----------------------------------


def test_criterion_6_inter_class_separation(hard_runs):
    improved = 0
    detail = []
    for run in hard_runs:
        part = gallery_probe_partition(run["test_ds"], single_image_gallery=True)
        gallery = [(s.subject_id, s.embedding) for s in part.gallery]
        probes = [(s.subject_id, s.embedding) for s in part.probe]
        untrained = model.init_model([run["dim"], *run["hidden"]], run["seed"])
        icd_trained = mean_inter_class_distance(gallery, probes, run["trained"]["scl"], normalize=True)
        icd_init = mean_inter_class_distance(gallery, probes, untrained, normalize=True)
        improved += icd_trained >= icd_init
        detail.append(f"{icd_trained:.3f}>={icd_init:.3f}")
    ok = improved == 5
    _line(6, ok, f"normalized inter-class distance grew in {improved}/5 seeds [{' '.join(detail)}]")
    assert ok


# --- criterion 7: extended-gallery monotonicity ----------------------------------


def test_criterion_7_extended_gallery(easy_runs):
    worst_drop = 0.0
    monotone = True
    for run in easy_runs["runs"]:
        distract_cfg = replace(
            presets.easy_synth_config(run["seed"] + 1000), n_subjects=100, n_injured=1
        )
        dds = generate_synthetic(distract_cfg)
        distractors = [
            (10_000 + r.subject_id, r.non_injured[0].embedding) for r in dds.subjects
        ]
        base = _rank1(run["params"], run["test_ds"])
        extended = _rank1(run["params"], run["test_ds"], distractors=distractors)
        monotone = monotone and extended <= base
        worst_drop = max(worst_drop, base - extended)
    ok = monotone and worst_drop <= 0.05
    _line(
        7,
        ok,
        f"100 distractors: rank-1 never improved ({monotone}), worst drop "
        f"{worst_drop * 100:.1f} points (<=5)",
    )
    assert ok


# --- criterion 8: protocol fidelity ----------------------------------------------


def test_criterion_8_protocol_fidelity():
    ds = generate_synthetic(presets.easy_synth_config(0))
    spec = SplitSpec(seed=11, repetitions=5)
    cfg = replace(presets.synthetic_regime(seed=0), epochs=2)
    report = repeated_evaluation(ds, spec, cfg, verification_pairs=5)

    five_reps = len(report.repetitions) == 5
    splits_ok = True
    for rep in range(5):
        train_ds, test_ds = subject_split(ds, spec, rep)
        if set(train_ds.subject_ids) & set(test_ds.subject_ids):
            splits_ok = False
        if train_ds.n_subjects != 7 or test_ds.n_subjects != 3:
            splits_ok = False
        if report.repetitions[rep].gallery_size != 3:
            splits_ok = False

    agg_ok = True
    for k in report.ranks:
        values = [r.rank_accuracies[k] for r in report.repetitions]
        mean = 0.0
        for v in values:
            mean += v
        mean /= len(values)
        var = 0.0
        for v in values:
            var += (v - mean) ** 2
        std = math.sqrt(var / len(values))
        agg_ok = agg_ok and report.rank_mean[k] == mean and report.rank_std[k] == std

    ok = five_reps and splits_ok and agg_ok
    _line(
        8,
        ok,
        f"5 repetitions: {five_reps}, subject-disjoint 70/30 splits: {splits_ok}, "
        f"mean/std match independent recomputation to full precision: {agg_ok}",
    )
    assert ok


# --- criterion 9: end-to-end determinism ------------------------------------------


def test_criterion_9_compare_determinism(tmp_path):
    ds = generate_synthetic(
        replace(presets.easy_synth_config(3), n_subjects=8, dim=6, n_non_injured=3, n_injured=3)
    )
    data = tmp_path / "dataset.csv"
    save_embeddings(ds, data)
    config = {
        "split": {"repetitions": 2},
        "train": {
            "learning_rate": 0.001,
            "epochs": 3,
            "batch_size": 8,
            "per_subject": 2,
            "hidden_dims": [8, 4],
        },
        "eval": {"verification_pairs": 5, "ranks": [1, 2]},
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config), encoding="utf-8")
    out = tmp_path / "cmp"
    args = ["compare", str(data), "--config", str(cfg_path), "--seed", "5", "--out", str(out)]

    assert cli_main(args) == 0
    first = (out / "compare_report.json").read_bytes()
    assert cli_main(args) == 0
    second = (out / "compare_report.json").read_bytes()

    ok = first == second and len(first) > 0
    _line(9, ok, f"two compare runs byte-identical ({len(first)} bytes)")
    assert ok
