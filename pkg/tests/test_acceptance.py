"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s``; each test prints one
``criterion N: PASS|FAIL`` line with the measured numbers.
"""
import math

import numpy as np
import pytest

from mec_ppo import noma, verify
from mec_ppo.balancer import MIN_TRANSFER_HZ, balance
from mec_ppo.baselines import MethodSpec, exhaustive_search, run_method
from mec_ppo.partition import INTERMEDIATE, PROGRAM, build_surrogate, power_value_grad_hess
from mec_ppo.report import Evaluator, feasibility_violations
from mec_ppo.scenario import ScenarioParams, fit_intermediate_model, generate_scenario

pytestmark = pytest.mark.acceptance


@pytest.fixture
def say(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return emit


def _bw(mhz):
    return ScenarioParams().updated(bandwidth=mhz * 1e6)


def test_criterion_1_es_gap(say):
    # epsilon = 1 s; the default 5 s stops 2-server runs almost at once (printed for reference)
    gaps, gaps_default = {}, {}
    for n in (4, 6, 8):
        tight, loose, es = [], [], []
        for seed in range(20):
            sc = generate_scenario(seed, 2, n)
            ev = Evaluator(sc)
            a = balance(sc, epsilon=1.0, evaluator=ev)
            b = balance(sc, evaluator=ev)
            e = exhaustive_search(sc, evaluator=ev, extra_candidates=[a.assignment, b.assignment])
            tight.append(a.makespan)
            loose.append(b.makespan)
            es.append(e.makespan)
        gaps[n] = np.mean(tight) / np.mean(es) - 1
        gaps_default[n] = np.mean(loose) / np.mean(es) - 1
    ok = all(g <= 0.10 for g in gaps.values())
    fmt = lambda d: ", ".join(f"N={n}: {100 * g:.1f}%" for n, g in d.items())
    say(1, ok, f"gap to ES at eps=1 [{fmt(gaps)}]; at eps=5 [{fmt(gaps_default)}]")
    assert ok


def test_criterion_2_method_ordering(say):
    bad, hpo_wins = [], {}
    for w in (4, 10, 20, 40):
        wins = 0
        for seed in range(20):
            sc = generate_scenario(seed, 2, 10, _bw(w))
            g = {t: run_method(sc, MethodSpec(t)).makespan for t in ("ppo", "fpo", "hpo", "zpo")}
            bad += [(w, seed, t) for t in ("fpo", "hpo", "zpo") if g["ppo"] > g[t] + 1e-6]
            wins += g["hpo"] < g["zpo"]
        hpo_wins[w] = wins / 20
    order_ok = not bad
    hpo_ok = all(hpo_wins[w] >= 0.7 for w in (10, 20, 40))
    say(2, order_ok and hpo_ok,
        f"ordering violations {len(bad)}/240; HPO<ZPO share "
        + ", ".join(f"{w} MHz: {100 * s:.0f}%" for w, s in hpo_wins.items()))
    assert order_ok, bad[:5]
    assert hpo_ok, hpo_wins


def test_criterion_3_noma_vs_tdma(say):
    worse = []
    for seed in range(50):
        sc = generate_scenario(seed, 2, 8)
        g_noma = balance(sc).makespan
        g_tdma = balance(sc.with_access("tdma")).makespan
        if g_noma > g_tdma + 1e-6:
            worse.append((seed, g_noma, g_tdma))
    G = 1e-13
    t_noma = noma.solve_min_upload_time([5e6, 5e6], [G, G], 1e6, 1e-20, [0.2, 0.2]).upload_time
    t_tdma = noma.tdma_min_upload_time([5e6, 5e6], [G, G], 1e6, 1e-20, 0.2).upload_time
    closed = (math.isclose(t_noma, 5.0, rel_tol=1e-6)
              and math.isclose(t_tdma, 10 / math.log2(3), rel_tol=1e-6))
    say(3, not worse and closed,
        f"NOMA slower on {len(worse)}/50 seeds; two-UE instance {t_noma:.6f} s vs {t_tdma:.6f} s")
    assert not worse
    assert closed


def _suite(n, say, name, seeds):
    res = verify.run_suite(name, seeds)
    say(n, res.passed, res.summary().split(" ", 1)[1])
    assert res.passed, res.failures[:5]


def test_criterion_4_newton_vs_bisection(say):
    _suite(4, say, "newton", 1000)


def test_criterion_5_round_trip(say):
    _suite(5, say, "roundtrip", 1000)


def test_criterion_6_gradients(say):
    rng = np.random.default_rng(6)
    worst_fd = worst_sur = 0.0
    for point in range(200):
        n = int(rng.integers(1, 6))
        prob = verify.random_server_problem(rng, n)
        x = rng.uniform(prob.lower, prob.data_size)
        s = prob.schedule(np.maximum(x, 1.0))
        which = PROGRAM if point % 2 == 0 else INTERMEDIATE
        T = s.t_pm if which == PROGRAM else s.t_ir
        args = (prob.gains, prob.bandwidth, prob.noise_density, T, which, prob.k, prob.b)
        _, grads, _ = power_value_grad_hess(x, *args)
        h = 1e-5 * np.maximum(x, 1e3)
        for l in range(n):
            fd = np.array([(power_value_grad_hess(x + e, *args)[0][l]
                            - power_value_grad_hess(x - e, *args)[0][l]) / (2 * e.sum())
                           for e in np.diag(h)])
            scale = np.abs(grads[l]).max()
            if scale > 0:
                worst_fd = max(worst_fd, np.abs(fd - grads[l]).max() / scale)
        if point < 100:
            sur = build_surrogate(prob, x, s.t_pm, s.t_ir)
            pm = power_value_grad_hess(x, prob.gains, prob.bandwidth, prob.noise_density, s.t_pm)
            ir = power_value_grad_hess(x, prob.gains, prob.bandwidth, prob.noise_density, s.t_ir,
                                       INTERMEDIATE, prob.k, prob.b)
            val = np.concatenate([pm[0], ir[0]])
            grad = np.concatenate([pm[1], ir[1]])
            worst_sur = max(worst_sur,
                            np.abs(sur(x) - val).max() / np.abs(val).max(),
                            np.abs(sur.gradient(x) - grad).max() / np.abs(grad).max())
    ok = worst_fd <= 1e-5 and worst_sur <= 1e-8
    say(6, ok, f"max finite-difference rel error {worst_fd:.2e} over 200 points; "
               f"surrogate mismatch at expansion point {worst_sur:.2e}")
    assert ok


def test_criterion_7_descent(say):
    sca = verify.run_suite("sca", 100)
    bcd = verify.run_suite("server", 100)
    ok = sca.passed and bcd.passed
    say(7, ok, "; ".join(r.summary().split(" ", 1)[1] for r in (sca, bcd)))
    assert ok, sca.failures[:3] + bcd.failures[:3]


def test_criterion_8_fit(say):
    m = fit_intermediate_model([(15, 6), (10, 5), (6, 4), (3, 3), (1, 2)])
    ok = abs(m.k - 0.2778) <= 1e-3 and abs(m.b - 2.0556) <= 1e-3
    say(8, ok, f"k={m.k:.4f}, b={m.b:.4f}")
    assert ok


def test_criterion_9_balancer_contracts(say):
    problems, checks = [], 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        I = int(rng.integers(1, 5))
        N = int(rng.integers(I, 12))
        sc = generate_scenario(seed, I, N)
        eps = float(rng.choice([0.05, 0.5, 5.0]))
        try:
            rep = balance(sc, epsilon=eps, check=True)
        except AssertionError as exc:
            problems.append(f"seed {seed}: {exc}")
            continue
        checks += rep.stats["donor_checks"]
        budget = rep.iterations * math.ceil(math.log2(sc.bandwidth / MIN_TRANSFER_HZ))
        if rep.makespan > rep.trace[0]["makespan"]:
            problems.append(f"seed {seed}: final above initial")
        if rep.iterations > 100 or rep.stats["halvings"] > budget:
            problems.append(f"seed {seed}: budget exceeded")
        if not math.isclose(rep.assignment.bandwidth.sum(), sc.bandwidth, rel_tol=1e-12):
            problems.append(f"seed {seed}: bandwidth not conserved")
    say(9, not problems, f"{len(problems)} violations over 100 runs; {checks} donor checks held")
    assert not problems, problems[:5]
    assert checks > 0


def test_criterion_10_feasibility(say):
    bad, count = [], 0
    small = ("ppo", "fpo", "hpo", "zpo", "preinstalled", "cg_fba", "cg_vba", "es", "ga")
    for seed in range(10):
        cases = [(generate_scenario(seed, 2, 5), small),
                 (generate_scenario(seed, 4, 16), small[:-2])]
        for sc, tags in cases:
            specs = [MethodSpec(t, iterations=100) for t in tags]
            specs.append(MethodSpec("ppo", access="tdma"))
            for spec in specs:
                rep = run_method(sc, spec)
                count += 1
                bad += [f"seed {seed} {spec.tag}/{spec.access}: {v}"
                        for v in feasibility_violations(sc, rep)]
    say(10, not bad, f"{len(bad)} violations over {count} returned solutions")
    assert not bad, bad[:5]


def test_criterion_11_trends(say):
    by_servers, eps3 = {}, {}
    for I in (2, 4, 8):
        five, three = [], []
        for seed in range(20):
            sc = generate_scenario(seed, I, 40)
            five.append(balance(sc).makespan)
            three.append(balance(sc, epsilon=3.0).makespan)
        by_servers[I] = np.mean(five)
        eps3[I] = np.mean(three)
    by_bw = {}
    for w in (4, 10, 20, 30, 40):
        by_bw[w] = np.mean([balance(generate_scenario(seed, 4, 40, _bw(w))).makespan
                            for seed in range(20)])
    dec = lambda d: all(b < a for a, b in zip(list(d.values()), list(d.values())[1:]))
    eps_ok = all(eps3[I] <= by_servers[I] for I in by_servers)
    ok = dec(by_servers) and dec(by_bw) and eps_ok
    fmt = lambda d: " / ".join(f"{v:.2f}" for v in d.values())
    say(11, ok, f"mean makespan for servers 2/4/8: {fmt(by_servers)} s, with eps=3: {fmt(eps3)} s; "
                f"W 4/10/20/30/40 MHz: {fmt(by_bw)} s")
    assert ok
