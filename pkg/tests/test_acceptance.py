"""Acceptance gate: one test group per criterion, each recording a pass/fail line.

The lines are printed as the checks run and again, one per criterion, in the
terminal summary (see conftest.py). The long-running experiments use the
harness end to end, so these runs also exercise manifest and report writing.
"""

import shutil
import time
from collections import defaultdict

import numpy as np
import pytest

from gfmsim import dgp as D
from gfmsim.evaluation import mase, percentage_difference, smape, smape_variant
from gfmsim.harness import (
    ExperimentConfig,
    RunManifest,
    forecast_path,
    load_scores,
    make_task,
    rerun_cell,
    run_experiment,
)
from gfmsim.models import ffnn, rnn
from gfmsim.models.local import fit_ar, fit_sar, fit_setar
from gfmsim.models.rnn import RnnConfig
from gfmsim.scenarios import build_dataset, preset_names, preset_spec
from gfmsim.stats import friedman_test, hochberg_adjust, hochberg_posthoc

from oracles import chi2_sf_df2, hochberg_oracle, numeric_gradient, relative_error
from test_preprocessing import _identity_round_trip

RESULTS: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)


def record(criterion: int, part: str, ok: bool, detail: str = "") -> bool:
    RESULTS[criterion].append((part, bool(ok), detail))
    print(f"criterion {criterion:2d} [{'PASS' if ok else 'FAIL'}] {part}: {detail}")
    return bool(ok)


def summary_lines() -> list[str]:
    lines = []
    for n in sorted(RESULTS):
        parts = RESULTS[n]
        ok = all(p[1] for p in parts)
        failed = [p[0] for p in parts if not p[1]]
        tail = "" if ok else " (failed: " + ", ".join(failed) + ")"
        lines.append(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}{tail}")
    return lines


def _run(tmp, name, **doc):
    doc.setdefault("out", str(tmp / name))
    cfg = ExperimentConfig.from_dict(doc)
    t0 = time.time()
    manifest = run_experiment(cfg, log=lambda m: None)
    assert not manifest.failed, manifest.failed[:5]
    return cfg, time.time() - t0


def _mean_smape(out, length=None):
    acc = defaultdict(list)
    for s in load_scores(out):
        if length is None or s.length == length:
            acc[s.model].append(s.smape)
    return {m: float(np.mean(v)) for m, v in acc.items()}, {m: len(v) for m, v in acc.items()}


# ---------------------------------------------------------------------------
# 1. metric oracles


def test_criterion_01_metric_examples():
    checks = {
        "smape F=Y": (smape([1.0, 2.0], [1.0, 2.0]), 0.0),
        "smape Y=1 F=2": (smape([2.0], [1.0]), 200.0 / 3.0),
        "smape Y=[1,1] F=[2,0.5]": (smape([2.0, 0.5], [1.0, 1.0]), 200.0 / 3.0),
        "variant zeros": (smape_variant([0.0], [0.0]), 0.0),
        "variant Y=0 F=0.1": (smape_variant([0.1], [0.0], eps=0.1), 100.0 * 0.1 / 0.6),
        "mase F=Y": (mase([3.0], [3.0], [1.0, 2.0]), 0.0),
        "mase 1.5": (mase([3.0, 4.0], [2.0, 2.0], [1.0, 2.0, 1.0, 2.0], 1), 1.5),
        "pct diff best": (percentage_difference({"a": 3.0, "b": 6.0})["a"], 0.0),
        "pct diff double": (percentage_difference({"a": 3.0, "b": 6.0})["b"], 100.0),
    }
    worst = max(abs(got - want) for got, want in checks.values())
    cell = percentage_difference({"best": 21.07, "m": 21.37})["m"]
    ok = record(1, "hand examples", worst <= 1e-12, f"max abs error {worst:.1e}")
    ok &= record(1, "pct diff cell 1.42", abs(cell - 1.42) <= 0.005, f"{cell:.4f}")
    assert ok


@pytest.mark.xfail(strict=True, reason="conflicts with the Y=0, F=0.1 example; see README, known failures")
def test_criterion_01_variant_close_to_standard_away_from_zero():
    variant, standard = smape_variant([12.0], [10.0]), smape([12.0], [10.0])
    gap = abs(variant - standard)
    record(1, "variant within 1 pp of smape at Y=10 F=12", gap < 1.0, f"variant {variant:.4f} vs smape {standard:.4f}")
    assert gap < 1.0


# ---------------------------------------------------------------------------
# 2. statistics oracles


def test_criterion_02_statistics():
    stat, p = friedman_test([[1.0, 2.0, 3.0], [1.5, 2.5, 3.5], [0.2, 0.4, 0.9]])
    ok = record(2, "friedman hand example", abs(stat - 6.0) <= 1e-12 and abs(p - 0.0498) <= 1e-3, f"stat {stat}, p {p:.5f} (exp(-3) = {chi2_sf_df2(6.0):.5f})")
    adj = hochberg_adjust([0.01, 0.03, 0.04]).tolist()
    ok &= record(2, "hochberg hand example", adj == pytest.approx([0.03, 0.04, 0.04], abs=1e-15), str(adj))
    rng = np.random.default_rng(11)
    bad = 0
    for _ in range(1000):
        n, k = int(rng.integers(3, 40)), int(rng.integers(3, 7))
        m = rng.normal(size=(n, k)) + rng.uniform(0, 1, size=k)
        names = [f"m{j}" for j in range(k)]
        res = hochberg_posthoc(m, names[0], names)
        raw = np.array([v[0] for v in res.values()])
        adj = np.array([v[1] for v in res.values()])
        order = np.argsort(raw, kind="stable")
        if not (np.all(adj >= raw - 1e-15) and np.all(adj <= 1.0) and np.all(np.diff(adj[order]) >= -1e-15)):
            bad += 1
        elif not np.allclose(adj, hochberg_oracle(raw.tolist()), atol=1e-15, rtol=0):
            bad += 1
    ok &= record(2, "invariants over 1000 matrices", bad == 0, f"{bad} violations")
    assert ok


# ---------------------------------------------------------------------------
# 3. DGP properties


def test_criterion_03_dgp_properties():
    gen = np.random.default_rng(3)
    unstable = 0
    for _ in range(1000):
        c = D.sample_stationary_ar_coefficients(3, rng=gen)
        roots = np.roots([-c.phi[2], -c.phi[1], -c.phi[0], 1.0])
        unstable += int(np.any(np.abs(roots) < 1.1 - 1e-9))
    ok = record(3, "AR(3) draws stationary", unstable == 0, f"{unstable}/1000 with a root modulus below 1.1")
    low = D.simulate_logistic_map(D.LOGISTIC_REFERENCE, 1_000_000, rng=5).values.min()
    ok &= record(3, "logistic non-negative over 1e6 steps", low >= 0.0, f"min {low:.3g}")
    mg = D.simulate_mackey_glass(D.MackeyGlassParams(initial_history=(1.0,) * 24), 2000, rng=0).values
    ok &= record(3, "Mackey-Glass fixed point", bool(np.all(mg == 1.0)), f"max |y-1| {np.abs(mg - 1).max()}")
    coeffs = D.ArCoefficients(0.3, (0.5, -0.2))
    a = D.simulate_setar(D.SetarParams(regimes=(coeffs,), initial_values=(0.1, 0.2)), 500, rng=42).values
    b = D.simulate_ar(coeffs, 500, burn_in=0, rng=42, initial_values=[0.1, 0.2]).values
    ok &= record(3, "single-regime SETAR equals AR", np.array_equal(a, b), "bitwise")
    assert ok


# ---------------------------------------------------------------------------
# 4. estimator consistency


def test_criterion_04_estimators():
    errs = []
    for seed in range(20):
        c = D.sample_stationary_ar_coefficients(3, rng=1000 + seed)
        y = D.simulate_ar(c, 1800, rng=seed).values
        errs.append(np.abs(np.array(fit_ar(y, 3).phi) - np.array(c.phi)))
    worst = float(np.max(np.mean(errs, axis=0)))
    ok = record(4, "AR(3) recovery", worst <= 0.1, f"worst mean abs error {worst:.4f}")
    phi = fit_sar(D.simulate_sar(D.SAR_USACCDEATHS, 2400, rng=5).values, 1, 12).phi[0]
    ok &= record(4, "SAR seasonal coefficient", 0.80 <= phi <= 0.90, f"{phi:.4f}")
    est = [fit_setar(D.simulate_setar(D.SETAR_REFERENCE, 6000, rng=s).values).threshold for s in range(20)]
    ok &= record(4, "SETAR threshold", abs(np.mean(est) - 2.0) <= 0.5, f"mean {np.mean(est):.4f}")
    assert ok


# ---------------------------------------------------------------------------
# 5. gradient checks


def test_criterion_05_gradients():
    worst = {}
    rng = np.random.default_rng(1)
    W, b = ffnn.init_params([5, 4, 3, 2], 0.5, rng)
    for bias in b:
        bias[:] = rng.normal(0, 0.5, bias.shape)
    X, Y = rng.normal(size=(3, 5)), rng.normal(size=(3, 2))
    _, gW, gb = ffnn.loss_and_grads(W, b, X, Y, 0.01)
    num = numeric_gradient(lambda: ffnn.loss_and_grads(W, b, X, Y, 0.01)[0], W + b)
    worst["FFNN"] = max(relative_error(a, n) for a, n in zip(gW + gb, num))
    for layers_n in (1, 2, 3):
        rng = np.random.default_rng(layers_n)
        layers, out = rnn.init_model(3, 2, RnnConfig(cell_dimension=4, num_layers=layers_n, init_std=0.5), rng)
        for layer in layers:
            layer.peep[:] = rng.normal(0, 0.5, layer.peep.shape)
        X, Y = rng.normal(size=(2, 5, 3)), rng.normal(size=(2, 5, 2))
        mask = np.ones((2, 5))
        params = [a for layer in layers for a in layer.arrays()] + [out]
        _, grads = rnn.loss_and_grads(layers, out, X, Y, mask, 0.01)
        num = numeric_gradient(lambda: rnn.loss_and_grads(layers, out, X, Y, mask, 0.01)[0], params)
        worst[f"RNN {layers_n}-layer"] = max(relative_error(a, n) for a, n in zip(grads, num))
    ok = record(5, "analytic vs finite differences", max(worst.values()) < 1e-4, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


# ---------------------------------------------------------------------------
# 6. round trip


def test_criterion_06_round_trip_every_preset():
    worst = {}
    for name in preset_names():
        task, _, test = make_task(build_dataset(preset_spec(name), 0))
        back = _identity_round_trip(task.train, test, 3, task.log_shift)
        worst[name] = max(float(np.max(np.abs(back[i] - test[i]))) for i in range(len(test)))
    name = max(worst, key=worst.get)
    ok = record(6, f"{len(worst)} presets", worst[name] <= 1e-9, f"worst {worst[name]:.1e} ({name})")
    assert ok


# ---------------------------------------------------------------------------
# 7, 8, 11. AR(3) single-series sweep


@pytest.fixture(scope="module")
def ar3_sweep(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("acceptance")
    cfg, seconds = _run(tmp, "ar3-ss", preset="ar3-ss", models=["AR-2", "AR-3", "AR-10", "GBT-3"], gbt="desk")
    yield cfg, seconds
    shutil.rmtree(cfg.out, ignore_errors=True)


def test_criterion_07_ar3_best_at_length_1800(ar3_sweep):
    cfg, seconds = ar3_sweep
    means, counts = _mean_smape(cfg.out, 1800)
    detail = ", ".join(f"{m} {means[m]:.3f}" for m in ("AR-3", "AR-10", "GBT-3")) + f" over {counts['AR-3']} replicates, sweep {seconds:.0f}s"
    ok = record(7, "AR(3) <= AR(10) and AR(3) <= GBT(3)", means["AR-3"] <= means["AR-10"] and means["AR-3"] <= means["GBT-3"], detail)
    ok &= record(7, "replicates and runtime", counts["AR-3"] >= 100 and seconds < 600, f"{counts['AR-3']} replicates, {seconds:.0f}s")
    assert ok


def test_criterion_08_short_length_effect(ar3_sweep):
    cfg, _ = ar3_sweep
    means, counts = _mean_smape(cfg.out, 18)
    detail = ", ".join(f"{m} {means[m]:.3f}" for m in ("AR-2", "AR-3", "AR-10")) + f" over {counts['AR-2']} replicates"
    ok = record(8, "AR(2) < AR(10) and AR(2) <= AR(3) + 0.5", means["AR-2"] < means["AR-10"] and means["AR-2"] <= means["AR-3"] + 0.5, detail)
    ok &= record(8, "replicates", counts["AR-2"] >= 200, str(counts["AR-2"]))
    assert ok


def test_criterion_11_availability_endpoints(ar3_sweep):
    cfg, _ = ar3_sweep
    short, _ = _mean_smape(cfg.out, 18)
    long_, _ = _mean_smape(cfg.out, 1800)
    detail = ", ".join(f"{m} {short[m]:.2f}->{long_[m]:.2f}" for m in sorted(short))
    ok = record(11, "SMAPE(1800) < SMAPE(18) for every model", all(long_[m] < short[m] for m in short), detail)
    assert ok


# ---------------------------------------------------------------------------
# 9. pooled regression on many short series


def test_criterion_09_pooled_beats_local_on_short_series(tmp_path):
    cfg, seconds = _run(
        tmp_path, "short", preset="ar3-ms-hom-short", scenario={"num_series": 100}, models=["AR-3", "PR-3"], replicates=200
    )
    means, counts = _mean_smape(cfg.out)
    detail = f"PR-3 {means['PR-3']:.3f}, AR-3 {means['AR-3']:.3f} over {counts['AR-3']} scored series, {seconds:.0f}s"
    ok = record(9, "PR(3) < AR(3)", means["PR-3"] < means["AR-3"], detail)
    ok &= record(9, "runtime", seconds < 300, f"{seconds:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 10. nonlinear beats linear on the chaotic series


def test_criterion_10_gbt_beats_linear_on_logistic(tmp_path):
    cfg, seconds = _run(
        tmp_path,
        "chaotic",
        preset="logistic-ms-hom-long",
        scenario={"series_length": 600, "num_series": 100},
        models=["AR-15", "PR-15", "GBT-15"],
        replicates=50,
        gbt="desk",
    )
    means, _ = _mean_smape(cfg.out)
    detail = ", ".join(f"{m} {means[m]:.3f}" for m in ("GBT-15", "PR-15", "AR-15")) + f", {seconds:.0f}s"
    ok = record(10, "GBT(15) < PR(15) and GBT(15) < AR(15)", means["GBT-15"] < means["PR-15"] and means["GBT-15"] < means["AR-15"], detail)
    ok &= record(10, "runtime", seconds < 900, f"{seconds:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 12. determinism


def test_criterion_12_determinism(tmp_path):
    doc = {
        "preset": "ar3-ms-hom-long",
        "scenario": {"series_length": [36, 90], "num_series": 10},
        "models": ["AR-3", "PR-3", "GBT-3", "FFNN-3", "RNN-3"],
        "replicates": 3,
        "tuner_trials": 2,
        "ensemble_seeds": 2,
        "scale": 50,
        "gbt": "desk",
    }
    one, t1 = _run(tmp_path, "w1", workers=1, **doc)
    four, t4 = _run(tmp_path, "w4", workers=4, **doc)
    names = ("results.csv", "summary.csv", "tests.csv", "availability.csv")
    same = [n for n in names if (one.out / "reports" / n).read_bytes() == (four.out / "reports" / n).read_bytes()]
    ok = record(12, "report CSVs identical for 1 and 4 workers", len(same) == len(names), f"{len(same)}/{len(names)} identical")
    manifest = RunManifest.load(one.out)
    mismatched = []
    for key in sorted(manifest.cells):
        cell, model, rep = key.split("/")
        stored = forecast_path(one.out, int(cell[1:].split("_")[0]), int(cell.split("_N")[1]), model, int(rep[1:]))
        rows = stored.read_text().splitlines()[1:]
        again = rerun_cell(one.out, key).forecasts.ravel()
        if [float(r.split(",")[2]) for r in rows] != [float(x) for x in again]:
            mismatched.append(key)
    ok &= record(12, "every cell rerun bit-identically", not mismatched, f"{len(manifest.cells)} cells, {len(mismatched)} mismatched")
    ok &= record(12, "runtime", t1 + t4 < 300, f"{t1 + t4:.0f}s")
    assert ok
