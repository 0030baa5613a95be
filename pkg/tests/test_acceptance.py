"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
"""
import json
import math
import statistics
import time

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from acceptance_log import record
from gradcheck import central_difference, ranknet_instance, relative_error
from infinite_label.bilinear import BilinearModel
from infinite_label.cli import main
from infinite_label.dataio import read_matrix, read_model, write_matrix, write_model
from infinite_label.experiments import (SWEEP_WORLD, SweepConfig, ground_truth_learner, hinge_trainer,
                                        run_fig1c, run_seen_fraction_sweep, summarize_sweep)
from infinite_label.learners import eszsl_objective, ranknet_gradient, ranknet_objective, train_eszsl
from infinite_label.metrics import hamming_loss, miap, topk_prf
from infinite_label.pacbound import BoundInput, estimate_risk, gap_experiment, theorem_bound
from infinite_label.synthgen import SynthConfig, make_world
from oracles import hamming_oracle, miap_oracle, random_instance, topk_oracle

SEEDS = (0, 1, 2, 3, 4)


def test_criterion_01_oracle_model_is_exact():
    started = time.perf_counter()
    cfg = SynthConfig(flip_prob=0.0)
    risks = []
    for seed in SEEDS:
        world = make_world(cfg, seed)
        risks.append(estimate_risk(world.v_star, world, 2000, 2000, seed=seed)[0])
    curve = run_fig1c(cfg, seeds=SEEDS, learner=ground_truth_learner)
    elapsed = time.perf_counter() - started
    ok = all(r == 0.0 for r in risks) and bool(np.all(curve.losses == 0.0)) and elapsed < 10
    record(1, ok, f"risks {risks}, curve max {curve.losses.max()}, {elapsed:.1f}s (< 10s)")
    assert ok


def test_criterion_02_noise_floor():
    started = time.perf_counter()
    p, mc = 0.1, 2000
    se = math.sqrt(p * (1 - p) / (mc * mc))
    deviations = []
    for seed in range(20):
        world = make_world(SynthConfig(flip_prob=p), seed)
        risk, _ = estimate_risk(world.v_star, world, mc, mc, seed=seed)
        deviations.append(abs(risk - p) / se)
    elapsed = time.perf_counter() - started
    ok = max(deviations) <= 4.0 and elapsed < 120
    record(2, ok, f"max |risk - 0.1| = {max(deviations):.2f} SE over 20 seeds, {elapsed:.1f}s (< 120s)")
    assert ok


def test_criteria_03_04_distance_binned_hamming():
    started = time.perf_counter()
    clean = run_fig1c(SynthConfig(), seeds=SEEDS, against="noiseless")
    observed = run_fig1c(SynthConfig(), seeds=SEEDS, against="flipped")
    elapsed = time.perf_counter() - started
    seen_loss, near_loss = clean.mean[0], clean.mean[1]
    ok3 = seen_loss <= 0.20 and near_loss <= 0.20 and elapsed < 300
    record(3, ok3, f"noiseless Hamming seen {seen_loss:.4f}, nearest bin {near_loss:.4f} (<= 0.20), "
                   f"{elapsed:.1f}s (< 300s)")
    near, far = observed.mean[1], observed.mean[-1]
    ok4 = far >= near
    record(4, ok4, f"observed Hamming farthest bin {far:.4f} >= nearest bin {near:.4f}; "
                   f"curve {np.round(observed.mean, 4).tolist()}")
    assert ok3 and ok4


def test_criterion_05_ranknet_gradient():
    started = time.perf_counter()
    rng = np.random.default_rng(2025)
    errors = []
    for _ in range(20):
        v, x, labels, y = ranknet_instance(rng)
        gamma = float(rng.choice([0.0, 0.05]))
        grad = ranknet_gradient(v, x, labels, y, gamma)
        fd = central_difference(lambda w: ranknet_objective(w, x, labels, y, gamma), v)
        errors.append(relative_error(grad, fd))
    elapsed = time.perf_counter() - started
    ok = max(errors) <= 1e-5 and elapsed < 30
    record(5, ok, f"max relative error {max(errors):.2e} (<= 1e-5) on 20 instances, {elapsed:.1f}s")
    assert ok


def test_criterion_06_eszsl_stationarity():
    rng = np.random.default_rng(2026)
    ratios = []
    for _ in range(10):
        _, x, labels, y = ranknet_instance(rng)
        gl, gd = (float(g) for g in rng.choice([0.01, 0.1, 1.0, 10.0], size=2))
        model = train_eszsl(x, labels, y, gl, gd)
        f = lambda w: eszsl_objective(w, x, labels, y, gl, gd)  # noqa: E731
        at_zero = central_difference(f, np.zeros_like(model.v), rel_step=1e-4)
        at_solution = central_difference(f, model.v, rel_step=1e-4)
        ratios.append(np.abs(at_solution).max() / (1e-6 * (1.0 + np.abs(at_zero).mean())))
    ok = max(ratios) <= 1.0
    record(6, ok, f"max |FD gradient| at the solution is {max(ratios):.3f} of the allowance")
    assert ok


def test_criterion_07_metric_oracles():
    rng = np.random.default_rng(2027)
    worst = 0.0
    for _ in range(1000):
        scores, truth = random_instance(rng)
        k = int(rng.integers(1, scores.shape[1] + 1))
        pred = np.where(scores > 0, 1, -1)
        worst = max(worst, abs(miap(scores, truth) - float(miap_oracle(scores, truth))))
        worst = max(worst, max(abs(a - float(b)) for a, b in zip(topk_prf(scores, truth, k),
                                                                 topk_oracle(scores, truth, k))))
        worst = max(worst, abs(hamming_loss(pred, truth) - float(hamming_oracle(pred, truth))))
    ok = worst <= 1e-12
    record(7, ok, f"largest deviation from the rational oracle {worst:.1e} over 1000 instances")
    assert ok


def test_criterion_08_bound_consistency():
    started = time.perf_counter()
    world = make_world(SynthConfig(), 0)
    grid = [(m, l) for m in (100, 500, 2000) for l in (10, 50, 200)]
    records = gap_experiment(grid, 20, world, hinge_trainer(), seed=0)
    elapsed = time.perf_counter() - started
    violations = [r for r in records if r.gap > r.bound]
    med = {cell: statistics.median(r.gap for r in records if (r.m, r.l) == cell) for cell in grid}
    paper_bound = theorem_bound(BoundInput(500, 10, 3, 2, 0.05))
    ok = (not violations and med[(2000, 200)] < med[(100, 10)] and paper_bound > 1 and elapsed < 900
          and len(records) == 180)
    record(8, ok, f"{len(violations)} of {len(records)} gaps exceed the bound; median gap (2000,200) "
                  f"{med[(2000, 200)]:.5f} < (100,10) {med[(100, 10)]:.5f}; bound at (500,10) = "
                  f"{paper_bound:.3f} > 1; {elapsed:.0f}s (< 900s)")
    assert ok


def test_criterion_09_seen_fraction_sweep():
    fractions = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5]
    rows = run_seen_fraction_sweep(SWEEP_WORLD, SweepConfig(fractions=fractions, learners=["ranknet"],
                                                            seeds=list(SEEDS)))
    summary = {s["fraction"]: s for s in summarize_sweep(rows)}
    m = {f: summary[f]["miap"] for f in fractions}
    beats_zero = all(r["miap"] > r["zero_miap"] for r in rows)
    first_step = m[1.0] - m[0.9]
    mean_step = (m[1.0] - m[0.5]) / 5
    ok = m[1.0] > m[0.5] and beats_zero and first_step <= mean_step
    record(9, ok, f"MiAP {[round(m[f], 4) for f in fractions]}, zero baseline "
                  f"{summary[1.0]['zero_miap']:.4f}; drop 1.0->0.9 {first_step:.5f} <= mean step {mean_step:.5f}")
    assert ok


def _tree(root):
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            data = p.read_bytes()
            if p.name.endswith("run_summary.json"):
                summary = json.loads(data)
                summary.pop("timings")
                data = json.dumps(summary, sort_keys=True).replace(str(root), "<root>").encode()
            out[str(p.relative_to(root))] = data
    return out


_ROUND_TRIPS = []


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 50), st.integers(1, 50)),
              elements=st.floats(allow_nan=False, allow_infinity=False)),
       st.sampled_from(["matrix", "model"]))
def _round_trip(tmp_path_factory, a, kind):
    path = tmp_path_factory.mktemp("rt") / "a.csv"
    if kind == "matrix":
        write_matrix(path, a)
        back = read_matrix(path, *a.shape)
    else:
        write_model(path, BilinearModel(a), {"learner": "hinge"})
        back = read_model(path).v
    _ROUND_TRIPS.append(back.tobytes() == a.tobytes())


def test_criterion_10_determinism_and_round_trips(tmp_path, tmp_path_factory):
    runs = []
    for run in ("a", "b"):
        root = tmp_path / run
        codes = [main(["gen", "--out", str(root / "world"), "--seed", "11", "--l-unseen", "200"])]
        for learner in ("hinge", "ranknet", "eszsl", "conse"):
            codes.append(main(["train", "--learner", learner, "--data", str(root / "world"), "--seed", "3",
                               "--out", str(root / "models" / f"{learner}.csv")]))
            codes.append(main(["eval", "--model", str(root / "models" / f"{learner}.csv"), "--data",
                               str(root / "world"), "--out", str(root / "reports" / f"{learner}.json"),
                               "--bins", "50"]))
        runs.append((codes, _tree(root)))
    identical = runs[0][1] == runs[1][1] and all(code == 0 for codes, _ in runs for code in codes)
    _ROUND_TRIPS.clear()
    _round_trip(tmp_path_factory)
    lossless = bool(_ROUND_TRIPS) and all(_ROUND_TRIPS)
    ok = identical and lossless
    record(10, ok, f"{len(runs[0][1])} output files byte-identical across two seeded runs: {identical}; "
                   f"{len(_ROUND_TRIPS)} property-tested round trips lossless: {lossless}")
    assert ok
