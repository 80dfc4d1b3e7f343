"""Release gate: every shipping criterion, one printed verdict line each.

Criteria 4 and 5 run full training sweeps and take minutes; everything
else is fast. Run the file alone with `pytest tests/test_acceptance.py -v`.
"""

import json

import numpy as np
import pytest

from arithbench.dataset import DatasetSpec, Operation, RangeSpec
from arithbench.gradcheck import FD_TOLERANCE, run_gradcheck
from arithbench.layers import LayerKind, ModelKind, init_model
from arithbench.metrics import simulate_threshold, sparsity_error, weight_sparsity
from arithbench.stats import (
    beta_mean_profile_ci,
    gamma_mean_profile_ci,
    wilson_interval,
)
from arithbench.sweep import (
    ResultStore,
    SweepConfig,
    ThresholdSettings,
    aggregate_rows,
    rows_to_tsv,
    run_sweep,
)
from arithbench.training import TrainConfig, run_trial

THRESHOLD_EPSILON = 1e-5
THRESHOLD_SIMS = 1_000_000
THRESHOLD_SEED = 1234


def report(capsys, label: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[{label}] {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="module")
def add_spec() -> DatasetSpec:
    return DatasetSpec(op=Operation.ADD)


@pytest.fixture(scope="module")
def mul_spec() -> DatasetSpec:
    return DatasetSpec(op=Operation.MUL)


@pytest.fixture(scope="module")
def add_threshold(add_spec):
    return simulate_threshold(
        add_spec, epsilon=THRESHOLD_EPSILON, n_sim=THRESHOLD_SIMS, seed=THRESHOLD_SEED
    )


@pytest.fixture(scope="module")
def mul_threshold(mul_spec):
    return simulate_threshold(
        mul_spec, epsilon=THRESHOLD_EPSILON, n_sim=THRESHOLD_SIMS, seed=THRESHOLD_SEED
    )


def run_seeds(kind, spec, threshold, iterations, seeds):
    records = []
    for seed in seeds:
        cfg = TrainConfig(iterations=iterations, seed=seed)
        records.append(run_trial(kind, spec, cfg, threshold, keep_trace=False))
    return records


def uniform_second_moment(lo: float, hi: float) -> float:
    return (hi**3 - lo**3) / (3.0 * (hi - lo))


def test_c1_analytic_gradients_match_finite_differences(capsys):
    results = run_gradcheck(instances=20, seed=0, in_dim=3, out_dim=4)
    worst = max(r.max_rel_error for r in results)
    kinds = {r.kind for r in results}
    ok = len(kinds) == 4 and len(results) == 80 and all(r.passed() for r in results)
    report(
        capsys,
        "criterion 1",
        ok,
        f"4 layer kinds x 20 instances x (params + input), "
        f"worst rel err {worst:.2e} < {FD_TOLERANCE:.0e}",
    )
    assert ok


def test_c2_wilson_interval_reference_values(capsys):
    # (successes, trials) -> interval in whole percent
    cells = [
        (31, 100, 23, 41),
        (0, 100, 0, 4),
        (100, 100, 96, 100),
        (14, 100, 9, 22),
        (7, 100, 3, 14),
    ]
    checked = []
    for successes, trials, lo_pct, hi_pct in cells:
        s = wilson_interval(successes, trials)
        got = (round(100 * s.ci_low), round(100 * s.ci_high))
        checked.append(got == (lo_pct, hi_pct))
    ok = all(checked)
    report(capsys, "criterion 2", ok, f"5 reference intervals exact to the percent: {checked}")
    assert ok


def test_c3_success_threshold_simulation(capsys, add_spec, add_threshold):
    zero = simulate_threshold(add_spec, epsilon=0.0, n_sim=10_000, seed=1)
    # independent sign-eps noise on each of the 2*d first-layer entries,
    # exact unit combiner on top: mean extrap MSE = eps^2 * 2d * E[x^2]
    analytic = (
        THRESHOLD_EPSILON**2 * 2 * add_spec.input_size * uniform_second_moment(2.0, 6.0)
    )
    rel = abs(add_threshold.value - analytic) / analytic
    ok = zero.value == 0.0 and rel < 0.05
    report(
        capsys,
        "criterion 3",
        ok,
        f"zero-perturbation threshold {zero.value}, simulated {add_threshold.value:.4e} "
        f"vs analytic {analytic:.4e} (rel {rel:.2%}, tol 5%)",
    )
    assert ok


def test_c4_linear_add_solves_in_expected_window(capsys, add_spec, add_threshold):
    records = run_seeds(ModelKind.LINEAR, add_spec, add_threshold, 200_000, range(10))
    solved = [r.solved_at for r in records if r.success]
    mean_solved = float(np.mean(solved)) if solved else float("nan")
    ok = len(solved) >= 8 and 20_000 <= mean_solved <= 200_000
    report(
        capsys,
        "criterion 4",
        ok,
        f"linear/add: {len(solved)}/10 succeeded (need >= 8), "
        f"mean solved-at {mean_solved:.0f} (need within [2e4, 2e5])",
    )
    assert ok


def test_c5_additive_cell_solves_add_on_big_budget(capsys, add_spec, add_threshold):
    records = run_seeds(ModelKind.NAC_ADD, add_spec, add_threshold, 1_000_000, range(10))
    n_success = sum(r.success for r in records)
    solved = sorted(r.solved_at for r in records if r.success)
    ok = n_success >= 7
    report(
        capsys,
        "criterion 5",
        ok,
        f"nac_add/add at 1e6 iterations: {n_success}/10 succeeded (need >= 7), "
        f"solved-at values {solved}",
    )
    assert ok


def test_c6_linear_never_learns_multiplication(capsys, mul_spec, mul_threshold):
    records = run_seeds(ModelKind.LINEAR, mul_spec, mul_threshold, 200_000, range(5))
    n_success = sum(r.success for r in records)
    worst = min(r.final_extrap_mse for r in records)
    ok = n_success == 0
    report(
        capsys,
        "criterion 6",
        ok,
        f"linear/mul: {n_success}/5 succeeded (need 0), best final extrap MSE "
        f"{worst:.3e} vs threshold {mul_threshold.value:.3e}",
    )
    assert ok


def test_c7_profile_interval_coverage(capsys):
    reps, n = 500, 50
    rng = np.random.default_rng(20260813)

    gamma_mean = 2.5 * 1.3
    hits_gamma = 0
    for _ in range(reps):
        s = gamma_mean_profile_ci(rng.gamma(shape=2.5, scale=1.3, size=n))
        hits_gamma += s.ci_low <= gamma_mean <= s.ci_high

    beta_mean = 0.5 * (2.0 / 5.0)
    hits_beta = 0
    for _ in range(reps):
        s = beta_mean_profile_ci(0.5 * rng.beta(2.0, 3.0, size=n))
        hits_beta += s.ci_low <= beta_mean <= s.ci_high

    cov_gamma = hits_gamma / reps
    cov_beta = hits_beta / reps
    ok = abs(cov_gamma - 0.95) <= 0.03 and abs(cov_beta - 0.95) <= 0.03
    report(
        capsys,
        "criterion 7",
        ok,
        f"95% CI coverage over {reps} reps of n={n}: gamma {cov_gamma:.1%}, "
        f"beta {cov_beta:.1%} (need within 95% +/- 3pp)",
    )
    assert ok


def test_c8_sparsity_error_bounds_and_ideals(capsys):
    rng = np.random.default_rng(8)
    kinds = list(ModelKind)
    in_bounds = True
    for i in range(10_000):
        model = init_model(kinds[i % len(kinds)], 5, 2, rng)
        e = sparsity_error(model)
        in_bounds = in_bounds and 0.0 <= e <= 0.5
    exact_ideal = weight_sparsity(np.array([[-1.0, 0.0, 1.0]])) == 0.0
    exact_worst = weight_sparsity(np.array([[0.5, 1.0]])) == 0.5
    ok = in_bounds and exact_ideal and exact_worst
    report(
        capsys,
        "criterion 8",
        ok,
        f"10k random inits within [0, 0.5]: {in_bounds}; "
        f"ideal weights -> 0: {exact_ideal}; half-saturated entry -> 0.5: {exact_worst}",
    )
    assert ok


def test_c9_sweep_determinism_and_resume(capsys, tmp_path):
    cfg = SweepConfig(
        models=(ModelKind.LINEAR, ModelKind.NAC_ADD),
        ops=(Operation.ADD,),
        range_pairs=((RangeSpec.single(1, 2), RangeSpec.single(2, 6)),),
        input_sizes=(8,),
        seeds=tuple(range(4)),
        train=TrainConfig(iterations=400, batch_size=16, eval_every=100, eval_n=64),
        threshold=ThresholdSettings(n_sim=2000, seed=3),
    )
    out1, out8 = tmp_path / "w1", tmp_path / "w8"
    run_sweep(cfg, out1, workers=1, verbose=False)
    run_sweep(cfg, out8, workers=8, verbose=False)
    tsv1 = rows_to_tsv(aggregate_rows(ResultStore(out1 / "results.jsonl").records()))
    tsv8 = rows_to_tsv(aggregate_rows(ResultStore(out8 / "results.jsonl").records()))
    identical = tsv1 == tsv8

    # resume: drop three rows, rerun, only those three execute
    store_path = out1 / "results.jsonl"
    rows = list(ResultStore(store_path).load().values())
    with open(store_path, "w", encoding="utf-8") as fh:
        for row in rows[:-3]:
            fh.write(json.dumps(row) + "\n")
    stats = run_sweep(cfg, out1, workers=1, verbose=False)
    resumed = stats.executed == 3 and stats.already_done == len(rows) - 3
    tsv_resumed = rows_to_tsv(aggregate_rows(ResultStore(store_path).records()))

    ok = identical and resumed and tsv_resumed == tsv1
    report(
        capsys,
        "criterion 9",
        ok,
        f"workers 1 vs 8 byte-identical summary: {identical}; resume executed "
        f"{stats.executed}/3 missing trials and reproduced the summary: "
        f"{resumed and tsv_resumed == tsv1}",
    )
    assert ok
