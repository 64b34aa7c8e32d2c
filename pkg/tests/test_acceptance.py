"""Acceptance criteria 1 to 10, run at full size.

Each test records one PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion still reports its measured numbers.
"""

import json
import math
import time

import numpy as np
import pytest

from adsignal import cli
from adsignal.core import AuctionInstance, revenue, scheme_revenue
from adsignal.errors import SizeGuardError
from adsignal.kv_exact import merge_same_region, solve_fixed_d, solve_fixed_m
from adsignal.lp import LPSolution, LPStatus
from adsignal.oracle import exact_sm_opt, exact_sm_separation, grid_opt
from adsignal.rv import FiniteOracle, FixedOracle, enumerate_q_uniform, required_samples, solve_rv
from adsignal.single_minded import RelaxationConfig, dp_separation, sm_vertex, solve_single_minded

from conftest import random_instance, random_sm, random_y, record_criterion


@pytest.fixture(scope="module")
def known_valuation_runs():
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    runs = []
    for _ in range(200):
        inst = random_instance(rng, n_max=5, m_max=2, d_max=3)
        runs.append((inst, solve_fixed_m(inst), solve_fixed_d(inst), grid_opt(inst, 100)))
    return runs, time.perf_counter() - start


def test_criterion_1_cross_solver(known_valuation_runs):
    runs, elapsed = known_valuation_runs
    diff = max(abs(a.value - b.value) for _, a, b, _ in runs)
    short = max(max(g - a.value, g - b.value) for _, a, b, g in runs)
    ok = diff <= 1e-6 and short <= 1e-4 and elapsed <= 300
    record_criterion(1, ok, f"max |fixed_m - fixed_d| = {diff:.2e}, max grid shortfall = {short:.2e}, "
                            f"{len(runs)} instances in {elapsed:.1f}s")
    assert ok


def test_criterion_2_support_merge(known_valuation_runs):
    runs, _ = known_valuation_runs
    change = max(abs(scheme_revenue(inst, merge_same_region(inst, a.scheme)) - a.value) for inst, a, _, _ in runs)
    ok = change <= 1e-9
    record_criterion(2, ok, f"max revenue change after merging = {change:.2e}")
    assert ok


def test_criterion_3_vertex_characterization():
    rng = np.random.default_rng(3003)
    worst_clause, worst_gap, refs = 0.0, -np.inf, {"grid": 0, "fixed-d": 0}
    for _ in range(50):
        inst, sm = random_sm(rng, d_max=6, n_max=6, m_max=2)
        d = sm.d
        for mask in range(1, 1 << d):
            S = [i for i in range(d) if mask >> i & 1]
            xi = sm_vertex(S, sm.deltas)
            common = sm.deltas[S] * xi[S]
            off = np.setdiff1d(np.arange(d), S)
            worst_clause = max(worst_clause, float(np.ptp(common)), float(np.abs(xi[off]).max(initial=0.0)),
                               abs(xi.sum() - 1.0), float(max(0.0, -common.min())))
        opt = exact_sm_opt(inst, sm)
        slack = inst.m * d / 200
        try:
            ref = grid_opt(inst, 200)
            refs["grid"] += 1
        except SizeGuardError:
            # the q=200 grid is too large here; the exact optimum dominates every grid value
            ref = solve_fixed_d(inst).value
            refs["fixed-d"] += 1
        worst_gap = max(worst_gap, ref - slack - 1e-6 - opt)
    ok = worst_clause <= 1e-12 and worst_gap <= 0
    record_criterion(3, ok, f"max clause violation = {worst_clause:.1e}, worst (reference - bound - opt) = "
                            f"{worst_gap:.2e}, references {refs}")
    assert ok


def test_criterion_4_dp_oracle():
    rng = np.random.default_rng(4004)
    start = time.perf_counter()
    worst = -np.inf
    for _ in range(100):
        inst, sm = random_sm(rng, d_min=1, d_max=10, n_max=10, m_max=3)
        beta = float(rng.uniform(0.1, 5.0))
        y = random_y(rng, sm.d, beta)
        _, exact = exact_sm_separation(inst, sm, y)
        for lam in (0.1, 0.05):
            cfg = RelaxationConfig(beta, 0.05, lam, RelaxationConfig.dp_step(lam, sm.d, inst.m, beta))
            _, val = dp_separation(inst, sm, y, cfg)
            worst = max(worst, exact - val - lam)
    elapsed = time.perf_counter() - start
    ok = worst <= 0 and elapsed <= 600
    record_criterion(4, ok, f"max (exact - dp - lambda_acc) = {worst:.2e}, 200 oracle calls in {elapsed:.1f}s")
    assert ok


def test_criterion_5_fptas():
    rng = np.random.default_rng(5005)
    worst_gap, worst_res = -np.inf, 0.0
    for _ in range(30):
        inst, sm = random_sm(rng, d_max=3, n_max=5, m_max=2)
        rep = solve_single_minded(inst, sm, 0.05)
        worst_gap = max(worst_gap, exact_sm_opt(inst, sm) - rep.value)
        worst_res = max(worst_res, rep.diagnostics["consistency_residual"])
    ok = worst_gap <= 0.05 and worst_res <= 1e-7
    record_criterion(5, ok, f"max (exact_sm_opt - fptas) = {worst_gap:.2e}, max residual = {worst_res:.1e}")
    assert ok


def test_criterion_6_sample_schedule():
    table = [(r, t, l, m) for r, t, l, m in zip(
        [0.01, 0.5, 0.2, 1e-3, 1e-6, 0.05, 0.9, 0.3, 0.01, 0.1, 1e-4, 0.02, 0.6, 0.07, 0.001, 0.25, 0.04, 0.15, 1e-5, 0.8],
        [0.1, 10, 0.05, 0.3, 0.02, 1.0, 0.5, 0.07, 0.2, 0.01, 0.4, 0.15, 2.0, 0.09, 0.6, 0.33, 0.08, 0.12, 0.25, 0.03],
        [1.0, 1.0, 0.5, 0.9, 0.3, 1.0, 0.2, 0.75, 0.6, 1.0, 0.45, 0.85, 1.0, 0.1, 0.66, 0.5, 0.95, 0.4, 0.7, 1.0],
        [2, 1, 3, 1, 4, 2, 5, 1, 2, 1, 3, 2, 6, 1, 2, 4, 1, 3, 2, 1])]
    ref = lambda r, t, l, m: math.ceil(2 * (l * m) ** 2 / t ** 2 * math.log(2 / r))  # noqa: E731
    bad = [row for row in table if required_samples(*row) != ref(*row)]
    ok = not bad and required_samples(0.01, 0.1, 1.0, 2) == 4239
    record_criterion(6, ok, f"{len(table) - len(bad)}/{len(table)} rows match the reference formula")
    assert ok


def test_criterion_7_rv_fptas():
    rng = np.random.default_rng(7007)
    eps = 0.3
    worst = -np.inf
    for _ in range(10):
        inst = random_instance(rng, n_max=4, m_max=2, d_max=3)
        ref = solve_fixed_d(inst).value
        vals = [solve_rv(FixedOracle(inst.valuations), inst.m, inst.lambdas, inst.prior, "fixed-d", eps,
                         seed=s).value for s in range(20)]
        worst = max(worst, ref - eps - float(np.mean(vals)))
    Va = np.array([[1.0, 0.0], [1.0, 0.0]])
    Vb = np.array([[0.2, 0.6], [0.2, 0.6]])
    mu = np.array([0.35, 0.65])
    analytic = 0.5 * (Va[0] @ mu) + 0.5 * (Vb[0] @ mu)
    two = [solve_rv(FiniteOracle([Va, Vb]), 1, [1.0], mu, "fixed-d", eps, seed=s).value for s in range(20)]
    two_err = abs(float(np.mean(two)) - analytic)
    ok = worst <= 0 and two_err <= 0.05
    record_criterion(7, ok, f"degenerate oracle: max (fixed_d - eps - mean) = {worst:.2e}; "
                            f"two-point |mean - analytic| = {two_err:.2e}")
    assert ok


def test_criterion_8_lipschitz():
    rng = np.random.default_rng(8008)
    violations = 0
    for _ in range(10_000):
        n, d = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        m = int(rng.integers(1, n + 1))
        inst = AuctionInstance(m, np.sort(rng.random(m))[::-1], np.full(d, 1.0 / d), rng.random((n, d)))
        xi = rng.dirichlet(np.ones(d))
        xj = rng.dirichlet(np.ones(d)) if rng.random() < 0.5 else np.abs(xi + rng.normal(scale=0.02, size=d))
        xj = xj / xj.sum()
        t = float(np.abs(xi - xj).max())
        if abs(revenue(inst, xi) - revenue(inst, xj)) > m * d * t + 1e-12:
            violations += 1
    ok = violations == 0
    record_criterion(8, ok, f"{violations} violations in 10000 pairs")
    assert ok


def test_criterion_9_grid_identities():
    mismatched = [(d, q) for d in range(1, 7) for q in range(1, 13)
                  if len(enumerate_q_uniform(d, q)) != math.comb(q + d - 1, d - 1)]
    rng = np.random.default_rng(9009)
    worst_drop = -np.inf
    for _ in range(20):
        inst = random_instance(rng, n_max=5, m_max=2, d_max=3)
        vals = [grid_opt(inst, q) for q in (10, 20, 40, 80)]
        worst_drop = max(worst_drop, max(a - b for a, b in zip(vals, vals[1:])))
    ok = not mismatched and worst_drop <= 1e-9
    record_criterion(9, ok, f"{len(mismatched)} cardinality mismatches, max drop along doubling = {worst_drop:.1e}")
    assert ok


def test_criterion_10_cli_contract(tmp_path, monkeypatch, capsys):
    start = time.perf_counter()
    problems = []
    for name in ("minmax.json", "sm2.json", "rv2.json"):
        once = cli.InstanceFile.from_dict(cli.read_json(cli.BUNDLED_PREFIX + name)).to_dict()
        if cli.InstanceFile.from_dict(once).to_dict() != once:
            problems.append(f"round trip {name}")

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"m": 1, "lambdas": [1.0], "prior": [0.5, 0.4], "valuations": [[1, 0], [0, 1]]}))
    codes = {
        0: cli.main(["solve", "fixed-d", "bundled:minmax.json", "-o", str(tmp_path / "r.json")]),
        2: cli.main(["solve", "fixed-d", str(bad)]),
        3: cli.main(["solve", "rv", "bundled:rv2.json", "--sample-cap", "3"]),
    }
    with monkeypatch.context() as mp:
        from adsignal import kv_exact
        mp.setattr(kv_exact, "solve", lambda lp, max_iter=50000: LPSolution(LPStatus.NUMERICAL, None, 0.0, None, {}))
        codes[4] = cli.main(["solve", "fixed-m", "bundled:minmax.json"])
    problems += [f"exit {want} got {got}" for want, got in codes.items() if want != got]
    if json.loads((tmp_path / "r.json").read_text())["value"] - 0.5 > 1e-6:
        problems.append("minmax value")

    outs = []
    for k in range(2):
        path = tmp_path / f"g{k}.json"
        cli.main(["gen", "general", "--n", "4", "--m", "2", "--d", "3", "--seed", "7", "-o", str(path)])
        outs.append(path.read_bytes())
    if outs[0] != outs[1]:
        problems.append("gen not deterministic")

    import csv
    import io
    rows = list(csv.DictReader(io.StringIO(cli.run_bench("bundled:suite.json"))))
    if len(rows) < 3 or any(r["status"] != "OK" or r["within_tolerance"] != "True" for r in rows):
        problems.append("bench gaps")
    capsys.readouterr()
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed <= 60
    record_criterion(10, ok, f"{'all checks green' if not problems else '; '.join(problems)} in {elapsed:.1f}s")
    assert ok
