"""Acceptance gate: one test per shipped criterion, one line per result.

Criteria 7-10 and 12 share one seed, so their instance streams coincide
and the disc tables computed for one criterion are reused by the next.
The big enumeration criteria run at full stated scale; expect roughly an
hour on one core for the whole file.
"""

import math

import numpy as np
import pytest

import sbplab as s
from sbplab import ExperimentConfig
from sbplab.cube import _scan
import sbplab.experiments as ex

ACCEPT_SEED = 2026


def _line(num: int, desc: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f"  [{detail}]" if detail else ""
    print(f"criterion {num:02d} {status} {desc}{suffix}")
    assert ok, f"criterion {num:02d} {desc}{suffix}"


def _cfg(kind, **kw):
    base = dict(trials=2000, seed=ACCEPT_SEED, K=1.0)
    base.update(kw)
    return ExperimentConfig(kind, **base)


def test_criterion_01_analytic_identities():
    ok = True
    detail = []
    for K in (0.1, 0.5, 1.0, 2.0, 4.0):
        p = s.gauss_p(K)
        ok &= abs(s.pair_q(K, 0.5) - p * p) < 1e-8
        ok &= abs(s.pair_q(K, 0.0) - p) < 1e-8
        ok &= abs(s.pair_q(K, 1.0) - p) < 1e-8
        grid = np.linspace(0.0, 1.0, 200)
        qs = np.array([s.pair_q(K, b) for b in grid])
        ok &= bool(np.all(qs <= p + 1e-12) and np.all(qs >= p * p - 1e-12))
        ok &= abs(s.mu2_integral(K) - s.mu2(K)) < 1e-8
    for K in (0.5, 1.0, 2.0):
        params = s.ModelParams.critical(K, 1000)
        closed = s.free_energy_second_deriv_half(params)
        h = 1e-3
        fd = (s.free_energy(params, 0.5 + h) - 2 * s.free_energy(params, 0.5)
              + s.free_energy(params, 0.5 - h)) / (h * h)
        rel = abs(fd - closed) / abs(closed)
        ok &= rel < 1e-4
        detail.append(f"K={K}: F''rel={rel:.1e}")
        ok &= abs(s.free_energy(params, 0.0) + math.log(2)) < 1e-9
        ok &= abs(s.free_energy(params, 0.5) + math.log(2)) < 1e-9
    _line(1, "analytic identities (q symmetries, mu2, F'' and F levels)",
          ok, "; ".join(detail))


def test_criterion_02_threshold_round_trip():
    ks = np.linspace(0.05, 6.0, 50)
    worst = max(abs(s.k_c(s.alpha_c(K)) - K) for K in ks)
    ok = worst <= 1e-9
    worst_log = 0.0
    for n in (18, 100, 1000):
        for alpha in (0.7, 1.8157, 3.2):
            params = s.ModelParams.critical_rows(alpha, n)
            worst_log = max(worst_log,
                            abs(s.log_expected_solutions(params)))
    ok &= worst_log <= 1e-9
    _line(2, "threshold round trip and E|Z|=1 calibration", ok,
          f"max|k_c(alpha_c(K))-K|={worst:.2e}, max|logE|Z||={worst_log:.2e}")


def test_criterion_03_shape_verification():
    ok = True
    details = []
    for K in (0.05, 0.3, 1.0, 3.0, 5.0):
        v = s.verify_shape(K)
        ok &= v.ok and v.eps_gap > 0
        if K < 0.1:
            ok &= abs(v.b1 - K / 12) < 1e-12 and abs(v.b2 - 0.04) < 1e-12
        elif K <= 4.0:
            ok &= v.b1 <= 0.005 and v.b2 >= 0.3
        details.append(f"K={K}: gap={v.eps_gap:.3g}")
    _line(3, "free-energy shape certified for five K regimes", ok,
          "; ".join(details))


def test_criterion_04_second_moment_bounded():
    alpha = s.alpha_c(1.0)
    ok = True
    totals = []
    for n in (100, 200, 400, 800, 1600, 3200):
        params = s.ModelParams.critical_rows(alpha, n)
        rep = s.ratio_exact(params)
        totals.append(rep.total)
        ok &= rep.total <= 10.0
        ok &= abs(rep.endpoint_low - 1.0) < 1e-7
        ok &= abs(rep.endpoint_high - 1.0) < 1e-7
        zero = s.ratio_exact(s.ModelParams(K=1.0, alpha=0.0, n=n, m=0))
        ok &= zero.total == 1.0
    mono = s.ratio_monotone_in_alpha(1.0, 400,
                                     [0, 100, 300, 500, 700, 726])
    ok &= all(b >= a for a, b in zip(mono, mono[1:]))
    rates = []
    for n in (500, 1000, 2000):
        params = s.ModelParams.critical_rows(alpha, n)
        rep = s.ratio_exact(params, delta=0.2)
        rates.append(math.log(rep.i2) / n)
    ok &= all(r < 0 for r in rates)
    ok &= max(rates) / min(rates) <= 2.0
    _line(4, "second-moment ratio bounded, monotone, 1 at m=0, I2 decays",
          ok, f"totals={['%.4f' % t for t in totals]}, "
              f"logI2/n={['%.5f' % r for r in rates]}")


def test_criterion_05_endpoint_decay():
    rep = s.q_endpoint_decay(1.0, [10 ** k for k in range(2, 7)])
    ok = rep.ok and -0.6 <= rep.slope <= -0.4 and rep.c > 0
    _line(5, "1 - q(1/n)/p falls like c/sqrt(n)", ok,
          f"slope={rep.slope:.4f}, c={rep.c:.4f}")


def test_criterion_06_solver_oracle_equivalence():
    rng = np.random.default_rng(99)
    ok = True
    for trial in range(200):
        n = int(rng.integers(4, 13))
        m = int(rng.integers(1, 2 * n + 4))
        inst = s.generate_instance(n, m, 31000, trial)
        sigmas = np.ones((2 ** n, n))
        for j in range(n):
            sigmas[:, j] = 1.0 - 2.0 * ((np.arange(2 ** n) >> j) & 1)
        objs = np.array([s.exact_objective(inst.rows, sig)
                         for sig in sigmas])
        rep = s.solve_exact(inst)
        ok &= rep.disc_value == float(np.min(objs))
        K = float(rng.uniform(0.3, 1.5))
        ok &= s.count_solutions(inst, K) == int(np.sum(objs <= K))
    perm_ok = True
    for trial in range(50):
        inst = s.generate_instance(10, 18, 32000, trial)
        base = s.solve_exact(inst).disc_value
        rng2 = np.random.default_rng(trial)
        rows = inst.rows
        variants = [
            rows[rng2.permutation(18)],
            rows[:, rng2.permutation(10)],
            rows * rng2.choice([-1.0, 1.0], size=(18, 1)),
            rows * rng2.choice([-1.0, 1.0], size=(1, 10)),
        ]
        for var in variants:
            other = s.Instance(n=10, rows=np.ascontiguousarray(var),
                               seed=0, stream_id=0)
            perm_ok &= s.solve_exact(other).disc_value == base
    ok &= perm_ok
    _line(6, "Gray solver exact against naive enumeration and symmetries",
          ok, "200 oracle instances, 50 symmetry instances")


def test_criterion_07_expected_count_one():
    rep = s.run_success_at_kc(_cfg("success_at_kc", n_list=(18,),
                                   trials=10000))
    d = rep.per_n[0]
    dev = abs(d["ez_mean"] - 1.0)
    ok = dev <= 3 * d["ez_se"]
    _line(7, "sample mean of |Z_{K_c}| within 3 SE of 1 at n=18", ok,
          f"mean={d['ez_mean']:.4f}, se={d['ez_se']:.4f}")


def test_criterion_08_positive_probability_at_criticality():
    rep = s.run_success_at_kc(_cfg("success_at_kc", n_list=(16, 20, 24),
                                   trials=5000))
    ok = True
    details = []
    for d in rep.per_n:
        ok &= 0.05 <= d["success_freq"] <= 0.95
        details.append(f"n={d['n']}: {d['success_freq']:.3f}")
    _line(8, "P(disc <= K_c) in [0.05, 0.95] at n in {16,20,24}", ok,
          "; ".join(details))


def test_criterion_09_window_scaling():
    rep = s.run_window(_cfg("window", n_list=tuple(range(12, 27)),
                            trials=2000))
    ok = all(d["disc_std"] > 0 for d in rep.per_n)
    slope = rep.regression["slope"]
    ok &= -1.4 <= slope <= -0.6
    _line(9, "log std(disc) vs log n slope in [-1.4, -0.6], n=12..26", ok,
          f"slope={slope:.3f}, ci=[{rep.regression['ci_low']:.3f}, "
          f"{rep.regression['ci_high']:.3f}]")


def test_criterion_10_lower_tail():
    rep = s.run_tail_lower(_cfg("tail_lower", n_list=(16, 20, 24),
                                trials=5000))
    ok = True
    for d in rep.per_n:
        hits = [c["hits"] for c in d["cells"]]
        ok &= hits == sorted(hits, reverse=True)
    pts = [(c["ny"], math.log(c["freq"]))
           for d in rep.per_n for c in d["cells"]
           if not c["censored"] and c["y"] > 0]
    lower = [v for x, v in pts if x <= np.median([x for x, _ in pts])]
    upper = [v for x, v in pts if x > np.median([x for x, _ in pts])]
    ok &= np.mean(upper) < np.mean(lower)
    fit = rep.regression
    ok &= fit is not None and fit["slope"] < 0 and fit["r2"] >= 0.8
    _line(10, "lower-tail log-frequency decreasing ~linearly in n*y", ok,
          f"slope={fit['slope']:.3f}, r2={fit['r2']:.3f}")


def test_criterion_11_martingale_diagnostics():
    rep = s.run_martingale(_cfg("martingale", n_list=(20,), trials=2000))
    d = rep.per_n[0]
    ok = d["q_identity_max_err"] <= 1e-10
    worst = max(abs(r["y_mean"]) / r["y_se"] for r in d["y_rows"])
    ok &= worst <= 3.0
    ok &= d["nested_frac"] == 1.0
    coupled = s.run_martingale(_cfg("martingale", n_list=(20,), trials=300,
                                    coupled_k=(0.5, 1.0, 2.0)))
    cd = coupled.per_n[0]
    ok &= cd["coupled_monotone_frac"] == 1.0 and cd["nested_frac"] == 1.0
    _line(11, "Q identity to 1e-10, Y centered within 3 SE, coupled "
              "monotonicity 100%", ok,
          f"qerr={d['q_identity_max_err']:.1e}, worst|mean|/se={worst:.2f}")


def test_criterion_12_anticoncentration():
    rep = s.run_anticoncentration(_cfg("anticoncentration", n_list=(20,),
                                       trials=5000,
                                       eps_list=(0.1, 0.3, 1.0)))
    ratios = [c["prob_per_eps"] for c in rep.per_n[0]["cells"]]
    factor = max(ratios) / min(ratios)
    ok = factor <= 3.0
    _line(12, "window-probability per unit eps stable within factor 3", ok,
          f"ratios={['%.3f' % r for r in ratios]}, factor={factor:.2f}")


def test_criterion_13_determinism(tmp_path):
    blobs = []
    for threads in (1, 2, 1):
        for key in [k for k in ex._TABLES if k[0] == 424242]:
            del ex._TABLES[key]
        base = str(tmp_path / f"det{len(blobs)}")
        cfg = ExperimentConfig("success_at_kc", n_list=(10, 12), trials=60,
                               seed=424242, K=1.0, threads=threads,
                               output_path=base)
        s.run_success_at_kc(cfg)
        blobs.append((open(base + ".json", "rb").read()
                      .replace(base.encode(), b"BASE"),
                      open(base + ".csv", "rb").read()))
    ok = blobs[0] == blobs[1] == blobs[2]
    _line(13, "byte-identical CSV/JSON across reruns and thread counts", ok)
