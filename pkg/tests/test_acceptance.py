"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""
import json
import math
import sys
import time

import numpy as np
import pytest
from scipy import integrate

from clwe_relu import cli
from clwe_relu.core import RandomStream, phi, random_direction
from clwe_relu.distributions import (sample_pphi, tv_py_uniform_bound, tv_py_uniform_detailed,
                                     wrapped_density)
from clwe_relu.learners import (ConstantLearner, OracleLearner, SGDArch, SGDOptions, evaluate_edge,
                                fit_constant, fit_oracle, fit_sgd, loss_and_grads)
from clwe_relu.params import ParamReport, derive_chain, eta_exponent, eta_regime
from clwe_relu.reduction import (NN_CLAMP, PHI_CLAMP, ReductionConfig, Verdict, default_gamma,
                                 default_nn_radius, run_trials)
from clwe_relu.relu import build_nn_1d, evaluate, width
from clwe_relu.stats import noisy_clean_bound, tv_noisy_clean, tv_phi_nn, variance_phi

LN2 = math.log(2.0)
TRIALS = 100
D, SIGMA, EPS, M1 = 32, 1e-2, 0.05, 1000


def test_criterion_01_exact_relu(record):
    t0 = time.perf_counter()
    worst, grid_ok, widths_ok = 0.0, True, True
    for R in (1, 3, 10):
        net = build_nn_1d(R)
        widths_ok &= width(net) == 4 * R + 2
        x = RandomStream(R).generator().uniform(-R - 2, R + 2, 100_000)
        worst = max(worst, float(np.max(np.abs(evaluate(net, x) - phi(x) * (np.abs(x) <= R)))))
        q = np.arange(-4 * (R + 2), 4 * (R + 2) + 1) / 4.0
        grid_ok &= bool(np.all(evaluate(net, q) == phi(q) * (np.abs(q) <= R)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and grid_ok and widths_ok and elapsed < 60
    record(1, "exact ReLU construction", ok,
           f"max dev {worst:.2e} (<= 1e-9), quarter grid exact={grid_ok}, widths 6/14/42={widths_ok}, "
           f"{elapsed:.1f}s")
    assert ok


def test_criterion_02_gaussianization_tv(record):
    t0 = time.perf_counter()
    gamma = 11.3
    a = tv_noisy_clean(gamma, 1e-6, 1e-2)
    b = tv_noisy_clean(gamma, 1e-8, 1e-2)
    elapsed = time.perf_counter() - t0
    ok = (a.value <= 0.0399 + a.numeric_tolerance and b.value <= 0.00399 + b.numeric_tolerance
          and abs(a.bound / b.bound - 10.0) < 1e-12 and elapsed < 120)
    record(2, "Gaussianization TV", ok,
           f"beta=1e-6: {a.value:.3e} <= {noisy_clean_bound(1e-6, 1e-2):.4f} (tol {a.numeric_tolerance:.1e}); "
           f"beta=1e-8: {b.value:.3e} <= {noisy_clean_bound(1e-8, 1e-2):.5f} (tol {b.numeric_tolerance:.1e}); "
           f"{elapsed:.1f}s")
    assert ok


def test_criterion_03_wrapped_marginal(record):
    t0 = time.perf_counter()
    results = {g: tv_py_uniform_detailed(g) for g in (0.5, 1.0)}
    norm_err = 0.0
    for g in (0.5, 1.0):
        val, _ = integrate.quad(lambda t: wrapped_density(g, t), -0.5, 0.5, epsabs=1e-13, epsrel=1e-13)
        norm_err = max(norm_err, abs(val - 1.0))
    elapsed = time.perf_counter() - t0
    r5, r1 = results[0.5], results[1.0]
    ok = (r5.value <= tv_py_uniform_bound(0.5) + r5.tolerance and r5.value <= 0.1153
          and r1.value <= tv_py_uniform_bound(1.0) + r1.tolerance and r1.value <= 4.3e-8
          and norm_err <= 1e-12 and elapsed < 30)
    record(3, "wrapped-marginal bound", ok,
           f"gamma=0.5: {r5.value:.4e} <= {tv_py_uniform_bound(0.5):.4f}; gamma=1: {r1.value:.3e} <= "
           f"{tv_py_uniform_bound(1.0):.2e}; normalization err {norm_err:.1e}; {elapsed:.1f}s")
    assert ok


def test_criterion_04_phi_nn_closeness(record):
    t0 = time.perf_counter()
    a = tv_phi_nn(4.0, 8, 0.1)
    b = tv_phi_nn(4.0, 40, 0.1)
    elapsed = time.perf_counter() - t0
    ok = a.value <= 0.0675 + a.numeric_tolerance and a.value <= a.bound + a.numeric_tolerance \
        and b.value < 1e-15 and elapsed < 60
    record(4, "phi/nn closeness", ok,
           f"R=8: {a.value:.4f} <= {a.bound:.4f} (tol {a.numeric_tolerance:.1e}); R=10*gamma: "
           f"{b.value:.2e} (< 1e-15); {elapsed:.1f}s")
    assert ok


def _rates(make, clamp, R=None):
    gamma = default_gamma(D)
    cfg = ReductionConfig.with_defaults(D, gamma, SIGMA, EPS, M1, clamp=clamp)
    out = {}
    for name, factory in make.items():
        for planted in (True, False):
            res = run_trials(cfg, factory, planted, TRIALS, seed=2024)
            out[(name, planted)] = sum(t.diagnostics.verdict is Verdict.CLWE_PLANTED for t in res)
    return cfg, out


@pytest.mark.slow
def test_criterion_05_distinguisher(record):
    t0 = time.perf_counter()
    make = {"oracle": lambda w, g: OracleLearner(w, g), "constant": lambda w, g: ConstantLearner()}
    cfg, planted = _rates(make, PHI_CLAMP)
    elapsed = time.perf_counter() - t0
    completeness = planted[("oracle", True)]
    null_oracle = TRIALS - planted[("oracle", False)]
    null_const = TRIALS - planted[("constant", False)]
    const_clwe = TRIALS - planted[("constant", True)]
    ok = completeness >= 90 and null_oracle >= 95 and null_const >= 95 and const_clwe >= 95 \
        and elapsed < 600
    record(5, "distinguisher completeness/soundness", ok,
           f"gamma={cfg.gamma:.3f} beta={cfg.beta:.1e} m2={cfg.m2}: oracle CLWE->Planted {completeness}/100, "
           f"null->Null oracle {null_oracle}/100 constant {null_const}/100, constant CLWE->Null "
           f"{const_clwe}/100; {elapsed:.0f}s")
    assert ok


@pytest.mark.slow
def test_criterion_06_nn_pipeline(record):
    t0 = time.perf_counter()
    gamma = default_gamma(D)
    R = default_nn_radius(gamma, D, SIGMA)
    make = {"nn-oracle": lambda w, g: OracleLearner(w, g, "nn", R),
            "constant": lambda w, g: ConstantLearner()}
    cfg, planted = _rates(make, NN_CLAMP, R)
    tv = tv_phi_nn(gamma, R, SIGMA)
    elapsed = time.perf_counter() - t0
    completeness = planted[("nn-oracle", True)]
    null_nn = TRIALS - planted[("nn-oracle", False)]
    null_const = TRIALS - planted[("constant", False)]
    const_clwe = TRIALS - planted[("constant", True)]
    ok = completeness >= 90 and null_nn >= 95 and null_const >= 95 and const_clwe >= 95 \
        and elapsed < 900
    record(6, "NN-class pipeline", ok,
           f"R={R} width={4 * R + 2}: nn-oracle CLWE->Planted {completeness}/100, null->Null nn-oracle "
           f"{null_nn}/100 constant {null_const}/100, constant CLWE->Null {const_clwe}/100; "
           f"per-sample TV(P_phi, P_NN)={tv.value:.2e}; {elapsed:.0f}s")
    assert ok


def test_criterion_07_edge_calibration(record):
    gamma = default_gamma(D)
    w = random_direction(D, RandomStream(7, 0, (0,)))
    sampler = lambda m, s: sample_pphi(D, gamma, w, SIGMA, m, s)  # noqa: E731
    oracle_value, _ = integrate.quad(lambda t: phi(t) ** 2, 0, 1, points=[0.25, 0.75])
    edge = evaluate_edge(fit_oracle(w, gamma), sampler, 100_000, RandomStream(7, 0, (1,)))
    const = fit_constant(sampler(1000, RandomStream(7, 0, (2,))))
    edge0 = evaluate_edge(const, sampler, 100_000, RandomStream(7, 0, (3,)))
    ok = abs(edge - oracle_value) <= 0.003 and abs(edge0) <= 0.003 and variance_phi() == 1 / 48
    record(7, "weak-learning edge calibration", ok,
           f"oracle edge {edge:.5f} vs 1/48={oracle_value:.5f} (+-0.003); constant edge {edge0:.1e} (+-0.003)")
    assert ok


def _gradient_probes(n_probes=100, h=1e-7):
    g = RandomStream(8).generator()
    worst, done, skipped = 0.0, 0, 0
    while done < n_probes:
        k, d, n = 8, 4, 16
        a, W, b = g.standard_normal(k), g.standard_normal((k, d)), g.uniform(-1, 1, k)
        x, y = g.standard_normal((n, d)), g.standard_normal(n)
        if np.min(np.abs(x @ W.T + b)) <= 1e-6 + 10 * h * (1 + np.abs(x).sum()):
            skipped += 1
            continue
        _, ga, gW, gb = loss_and_grads(a, W, b, x, y)
        for p, grad in ((a, ga), (W, gW), (b, gb)):
            idx = tuple(g.integers(0, s) for s in p.shape)
            old = p[idx]
            p[idx] = old + h
            up = loss_and_grads(a, W, b, x, y)[0]
            p[idx] = old - h
            down = loss_and_grads(a, W, b, x, y)[0]
            p[idx] = old
            fd = (up - down) / (2 * h)
            worst = max(worst, abs(fd - grad[idx]) / max(1.0, abs(fd), abs(grad[idx])))
        done += 1
    return worst, skipped


def _sgd_edge(d, gamma, seed=0):
    base = RandomStream(seed, 0, (d,))
    w = random_direction(d, base.spawn(0))
    train = sample_pphi(d, gamma, w, SIGMA, 20_000, base.spawn(1))
    res = fit_sgd(train, SGDArch(64), SGDOptions(0.05, 20, 64, base.spawn(2)))
    sampler = lambda m, s: sample_pphi(d, gamma, w, SIGMA, m, s)  # noqa: E731
    return evaluate_edge(res.hypothesis, sampler, 100_000, base.spawn(3)), res.diverged


def test_criterion_08_sgd(record):
    worst, skipped = _gradient_probes()
    easy, easy_div = _sgd_edge(8, 0.25)
    hard, hard_div = _sgd_edge(64, 2 * math.sqrt(64))
    ok = worst <= 1e-5 and easy >= 0.005 and not easy_div
    record(8, "SGD gradient check and edge", ok,
           f"max rel grad err {worst:.1e} over 100 probes ({skipped} kink-adjacent skipped); "
           f"easy edge {easy:.4f} (>= 0.005); hard regime edge {hard:.2e} (reported, diverged={hard_div})")
    assert ok


def test_criterion_09_params(record):
    low = derive_chain(64, 8192, -64 * LN2)
    high = derive_chain(64, 16384, -64 * LN2)
    eta = eta_regime(0.25, 4096)
    examples = (low.violated() == ["3n*ln(d/beta) <= d"] and high.all_satisfied
                and high.sigma_prime == pytest.approx(256.0) and eta.n == 512)
    delta_ok = eta_exponent(1 / 3) == pytest.approx(0.5)
    factors = [derive_chain(64, 16384, -s * LN2).log_gapsvp_factor for s in (1, 8, 64, 512, 4096, 1e5)]
    mono = all(a < b for a, b in zip(factors, factors[1:]))
    reports = [low, high, eta, eta_regime(1 / 3, 2**15), derive_chain(10, 1000, -1e-3, 2.5, 0.7)]
    trip = all(ParamReport.from_json(r.to_json()) == r and ParamReport.from_json(r.to_json()).to_json()
               == r.to_json() for r in reports)
    ok = examples and delta_ok and mono and trip
    record(9, "params calculator", ok,
           f"examples={examples} (d=8192 violated, d=16384 satisfied, eta=0.25 -> n={eta.n}); "
           f"eta=1/3 -> delta={eta_exponent(1 / 3):.3f}; monotone={mono}; round-trip={trip}")
    assert ok


REPRO_COMMANDS = [
    ["sample", "--dist", "clwe", "--d", "32", "--gamma", "11.3", "--beta", "1e-9", "--m", "1000",
     "--seed", "7", "--emit-secret", "--output", "clwe.csv"],
    ["sample", "--dist", "null", "--d", "8", "--m", "500", "--output", "null.csv"],
    ["sample", "--dist", "pphi", "--d", "8", "--sigma", "0.01", "--m", "500", "--output", "pphi.csv"],
    ["sample", "--dist", "pnn", "--d", "8", "--gamma", "3", "--R", "20", "--sigma", "0.01", "--m", "500",
     "--output", "pnn.csv"],
    ["build-nn", "--R", "3", "--output", "nn.json"],
    ["plot-fig1", "--R", "3", "--output", "fig1.svg"],
    ["distinguish", "--d", "8", "--gamma", "6", "--epsilon", "0.2", "--m1", "200", "--trials", "6",
     "--output", "dist.json"],
    ["distinguish", "--d", "8", "--gamma", "6", "--epsilon", "0.2", "--m1", "200", "--trials", "4",
     "--learner", "sgd", "--sgd-epochs", "1", "--output", "dist_sgd.json"],
    ["train", "--epochs", "3", "--m", "3000", "--m-eval", "5000", "--output", "train"],
    ["verify", "--mc-x", "20", "--mc", "20000", "--output", "verify.json"],
    ["params", "--eta", "0.25", "--d", "4096", "--output", "eta.json"],
    ["params", "--n", "64", "--d", "16384", "--sigma-log2", "-64", "--output", "chain.json"],
]


def test_criterion_10_reproducibility(record, tmp_path, monkeypatch, capsys):
    runs = []
    for threads in (1, 3):
        out = tmp_path / f"threads{threads}"
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(out))
        codes = [cli.main(cmd + ["--threads", str(threads)]) for cmd in REPRO_COMMANDS]
        files = {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
        runs.append((codes, files))
    capsys.readouterr()
    (codes1, f1), (codes3, f3) = runs
    same = f1 == f3
    embedded = all(b"artifact_version" in v for v in f1.values())
    ok = codes1 == codes3 == [0] * len(REPRO_COMMANDS) and same and embedded and len(f1) >= 14
    diff = sorted(k for k in f1 if f1.get(k) != f3.get(k))
    record(10, "reproducibility", ok,
           f"{len(REPRO_COMMANDS)} commands, {len(f1)} artifacts byte-identical at threads 1 vs 3: {same}"
           f"{' differing: ' + json.dumps(diff) if diff else ''}; version embedded in all: {embedded}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
