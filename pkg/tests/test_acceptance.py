"""End-to-end acceptance battery.

Each test here guards one of the headline behaviors of the package: surrogate
tightness, monotone ascent, dominance of the split design over its frozen
baseline, the closed-form rate ceiling, sensing-metric cross-checks, the
near-field distance expansion, the statistics toolbox, parallel determinism,
and the CSI-error degradation direction. The expensive solve batches live in
module-scoped fixtures so later tests can audit the same solutions.

The conftest terminal hook turns each test into one pass/fail summary line.
"""

import math
import time

import numpy as np
import pytest
import scipy.integrate

from holo_isac.config import preset_config
from holo_isac.experiments import (
    generate_trial_data,
    make_plan,
    run_experiment,
    solve_instance,
)
from holo_isac.geometry import ArrayGeometry, element_distance, fresnel_distance
from holo_isac.objective import sum_rate_upper_bound
from holo_isac.optimizers import OptimizerConfig, run_hao_sca, sca_surrogate_gamma
from holo_isac.rates import RsNomaSolution, Grouping, rate_breakdown
from holo_isac.records import write_records
from holo_isac.sensing import (
    crlb_closed_form,
    crlb_lower_bound,
    detection_probability,
    fisher_information,
    q_function,
    q_inverse,
)
from holo_isac.stats import f_cdf, one_way_anova, paired_t_test, t_cdf
from holo_isac.channel import SensingTarget

MASTER_SEED = 20240917
N_DESK_INSTANCES = 100


def trial_rng(master_seed, sweep_index, trial_index):
    return np.random.default_rng(
        np.random.SeedSequence((master_seed, sweep_index, trial_index)))


# =====================================================================
# Shared solve batches
# =====================================================================

@pytest.fixture(scope="module")
def desk_cfg():
    return preset_config("desk_small")


@pytest.fixture(scope="module")
def desk_instances(desk_cfg):
    """100 independent desk-scale draws (64 antennas, 8 users, 2 targets)."""
    return [generate_trial_data(desk_cfg, trial_rng(MASTER_SEED, 0, t))
            for t in range(N_DESK_INSTANCES)]


@pytest.fixture(scope="module")
def c2_batch(desk_cfg, desk_instances):
    """Cold block-ascent runs on every desk instance, with timing."""
    geom = desk_cfg.array_geometry()
    weights = desk_cfg.objective_weights()
    limits = desk_cfg.qos_limits()
    s2n, s2s = desk_cfg.sigma_n2_watts, desk_cfg.sigma_s2_watts
    opt = OptimizerConfig(max_iters=12, inner_steps=20, epsilon=1e-4)
    groups = desk_cfg.population.num_groups

    runs = []
    start = time.perf_counter()
    for data in desk_instances:
        sol, trace = run_hao_sca(data.channels_est, data.targets, geom,
                                 weights, limits, s2n, s2s, opt,
                                 num_groups=groups)
        runs.append((sol, trace, data))
    elapsed = time.perf_counter() - start
    return {"runs": runs, "elapsed": elapsed}


@pytest.fixture(scope="module")
def c3a_batch(desk_cfg, desk_instances):
    """Converged frozen-baseline runs plus warm-started split runs."""
    geom = desk_cfg.array_geometry()
    weights = desk_cfg.objective_weights()
    limits = desk_cfg.qos_limits()
    s2n, s2s = desk_cfg.sigma_n2_watts, desk_cfg.sigma_s2_watts
    groups = desk_cfg.population.num_groups
    noma_opt = OptimizerConfig(max_iters=40, inner_steps=16, epsilon=1e-2)
    rs_opt = OptimizerConfig(max_iters=10, inner_steps=16, epsilon=1e-4)

    pairs = []
    for data in desk_instances:
        sol_n, tr_n = run_hao_sca(data.channels_est, data.targets, geom,
                                  weights, limits, s2n, s2s, noma_opt,
                                  num_groups=groups, conventional_noma=True)
        rounds = 0
        while not tr_n.converged and rounds < 20:
            sol_n, tr_n = run_hao_sca(data.channels_est, data.targets, geom,
                                      weights, limits, s2n, s2s, noma_opt,
                                      num_groups=groups, warm_start=sol_n,
                                      conventional_noma=True)
            rounds += 1
        sol_rs, tr_rs = run_hao_sca(data.channels_est, data.targets, geom,
                                    weights, limits, s2n, s2s, rs_opt,
                                    num_groups=groups, warm_start=sol_n)
        pairs.append((sol_n, tr_n, sol_rs, tr_rs, data))
    return pairs


@pytest.fixture(scope="module")
def c3b_batch():
    """200 paired trials in the strongly correlated single-group regime."""
    cfg = preset_config("desk_tiny")
    cfg.population.num_users = 4
    cfg.population.num_targets = 2
    cfg.population.num_groups = 1
    cfg.channel.rho_c = 0.7
    cfg.weights.alpha1 = 1.0
    cfg.weights.alpha2 = 0.0
    cfg.weights.alpha3 = 0.0
    cfg.weights.alpha4 = 0.0
    cfg.optimizer.max_iters = 25

    s2n = cfg.sigma_n2_watts
    rs_rates, noma_rates, audited = [], [], []
    for trial in range(200):
        data = generate_trial_data(cfg, trial_rng(MASTER_SEED, 1, trial))
        rs_sol, _ = solve_instance("hao_sca", data.channels_est,
                                   data.targets, cfg)
        noma_sol, _ = solve_instance("conv_noma", data.channels_est,
                                     data.targets, cfg)
        rs_rates.append(rate_breakdown(rs_sol, data.channels_true, s2n).sum_rate)
        noma_rates.append(
            rate_breakdown(noma_sol, data.channels_true, s2n).sum_rate)
        audited.append((rs_sol, data))
        audited.append((noma_sol, data))
    return {"cfg": cfg, "rs": np.array(rs_rates),
            "noma": np.array(noma_rates), "audited": audited}


# =====================================================================
# 1: the SINR surrogate is exact at its anchor
# =====================================================================

def test_criterion_01_surrogate_tightness():
    rng = np.random.default_rng(MASTER_SEED)
    m, k = 16, 4
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        h = rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))
        w0 = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        w0 /= np.linalg.norm(w0)
        user = int(rng.integers(k))
        others = rng.standard_normal((k - 1, m)) + 1j * rng.standard_normal((k - 1, m))
        interference = float(np.sum(np.abs(others.conj() @ h[user]) ** 2))
        s2 = float(rng.uniform(0.1, 2.0))
        true = float(np.abs(np.vdot(h[user], w0)) ** 2 / (interference + s2))
        sur = sca_surrogate_gamma(w0, w0, h[user], interference, s2)
        worst = max(worst, abs(sur - true) / true)
    elapsed = time.perf_counter() - start
    print(f"\n  anchor tightness: worst relative error {worst:.3e} "
          f"over 1000 anchors in {elapsed:.2f} s")
    assert worst < 1e-9
    assert elapsed < 10.0


# =====================================================================
# 2: block ascent never goes downhill
# =====================================================================

def test_criterion_02_monotone_ascent(c2_batch):
    monotone = sum(trace.monotone for _, trace, _ in c2_batch["runs"])
    total = len(c2_batch["runs"])
    print(f"\n  monotone traces: {monotone}/{total} "
          f"({c2_batch['elapsed']:.1f} s)")
    assert monotone >= 0.99 * total
    assert c2_batch["elapsed"] < 300.0


# =====================================================================
# 3: the split design dominates its frozen baseline
# =====================================================================

def test_criterion_03_rs_dominance_per_instance(c3a_batch):
    converged = sum(tr_n.converged for _, tr_n, _, _, _ in c3a_batch)
    wins = sum(tr_rs.objectives[-1] >= tr_n.objectives[-1] - 1e-9
               for _, tr_n, _, tr_rs, _ in c3a_batch)
    print(f"\n  baseline converged {converged}/{len(c3a_batch)}, "
          f"warm-start dominance {wins}/{len(c3a_batch)}")
    assert converged == len(c3a_batch)
    assert wins == len(c3a_batch)


def test_criterion_03_rs_gain_direction(c3b_batch):
    rs, noma = c3b_batch["rs"], c3b_batch["noma"]
    test = paired_t_test(rs, noma)
    gain = float(np.mean(rs - noma))
    print(f"\n  correlated regime: mean gain {gain:+.3f} bit/s/Hz, "
          f"t={test.statistic:.2f}, p={test.p_display()}, n={rs.size}")
    assert gain > 0.0
    assert test.p_value < 0.05


# =====================================================================
# 4: no solution ever beats the interference-free ceiling
# =====================================================================

def test_criterion_04_sum_rate_upper_bound(desk_cfg, c2_batch, c3a_batch,
                                           c3b_batch):
    s2n = desk_cfg.sigma_n2_watts
    p_max = desk_cfg.p_max_watts
    checked = 0
    violations = 0
    worst_margin = np.inf

    def audit(sol, channels, sigma_n2, power_budget):
        nonlocal checked, violations, worst_margin
        achieved = rate_breakdown(sol, channels, sigma_n2).sum_rate
        bound = sum_rate_upper_bound(channels, power_budget, sigma_n2)
        checked += 1
        worst_margin = min(worst_margin, bound - achieved)
        if achieved > bound * (1.0 + 1e-9):
            violations += 1

    for sol, _, data in c2_batch["runs"]:
        audit(sol, data.channels_true, s2n, p_max)
    for sol_n, _, sol_rs, _, data in c3a_batch:
        audit(sol_n, data.channels_true, s2n, p_max)
        audit(sol_rs, data.channels_true, s2n, p_max)
    cfg_b = c3b_batch["cfg"]
    for sol, data in c3b_batch["audited"]:
        audit(sol, data.channels_true, cfg_b.sigma_n2_watts,
              cfg_b.p_max_watts)

    print(f"\n  ceiling audit: {checked} solutions, {violations} violations, "
          f"smallest margin {worst_margin:.3f} bit/s/Hz")
    assert checked == 100 + 2 * 100 + 2 * 200
    assert violations == 0


# =====================================================================
# 5: the two CRLB routes invert each other
# =====================================================================

def test_criterion_05_crlb_consistency():
    lam = 3.0e-3
    geom = ArrayGeometry(mx=4, my=4, dx=lam / 4, dy=lam / 4, wavelength=lam)
    s2s = 10.0 ** (-11.5)
    rng = np.random.default_rng(MASTER_SEED + 5)
    start = time.perf_counter()
    worst_lo, worst_hi = np.inf, 0.0
    for _ in range(50):
        m = geom.m_total
        w = rng.standard_normal((4, m)) + 1j * rng.standard_normal((4, m))
        w /= np.linalg.norm(w, axis=1)[:, None]
        sol = RsNomaSolution(
            grouping=Grouping(assignment=[0, 0], sic_order=[[0, 1]]),
            w_common=w[:1], w_private=w[1:3], w_sensing=w[3],
            p_common=np.array([float(rng.uniform(0.5, 2.0))]),
            p_private=rng.uniform(0.5, 2.0, 2),
            p_sensing=float(rng.uniform(0.5, 2.0)),
            rho=np.array([0.5, 0.5]),
        )
        t = SensingTarget(theta=float(rng.uniform(-0.8, 0.8)),
                          phi=float(rng.uniform(-2.5, 2.5)),
                          r=float(rng.uniform(0.3, 1.5)),
                          rcs=float(rng.uniform(0.1, 1.0)))
        prod = crlb_closed_form(t, sol, geom, s2s) * fisher_information(
            t, sol, geom, s2s)
        worst_lo, worst_hi = min(worst_lo, prod), max(worst_hi, prod)
        assert 0.99 < prod < 1.01
        p_max = sol.total_power()  # probe power is within the budget
        assert crlb_lower_bound(t, geom, s2s, p_max) <= crlb_closed_form(
            t, sol, geom, s2s)
    elapsed = time.perf_counter() - start
    print(f"\n  crlb x fisher in [{worst_lo:.6f}, {worst_hi:.6f}] "
          f"over 50 instances in {elapsed:.2f} s")
    assert elapsed < 30.0


# =====================================================================
# 6: detection chain calibration
# =====================================================================

def test_criterion_06_detection_calibration():
    for p_fa in (1e-3, 0.05, 0.5):
        assert abs(detection_probability(0.0, p_fa) - p_fa) < 1e-9
    gammas = np.linspace(0.0, 25.0, 100)
    pds = np.array([detection_probability(g, 1e-3) for g in gammas])
    assert np.all(np.diff(pds) > 0.0)
    xs = np.linspace(-6.0, 6.0, 49)
    worst = max(abs(q_inverse(q_function(x)) - x) for x in xs)
    print(f"\n  tail round-trip worst error {worst:.3e}")
    assert worst < 1e-8


# =====================================================================
# 7: near-field distance expansion accuracy
# =====================================================================

def test_criterion_07_fresnel_accuracy():
    lam = 3.0e-3
    geom = ArrayGeometry(mx=16, my=16, dx=lam / 4, dy=lam / 4, wavelength=lam)
    r = 100.0 * geom.aperture
    m, n = geom.element_offsets()
    worst = 0.0
    for theta in np.linspace(-np.pi / 3, np.pi / 3, 20):
        for phi in np.linspace(-np.pi, np.pi, 20, endpoint=False):
            exact = element_distance(geom, theta, phi, r, m, n)
            approx = fresnel_distance(geom, theta, phi, r, m, n)
            worst = max(worst, float(np.max(np.abs(approx - exact) / exact)))
    print(f"\n  expansion worst relative error {worst:.3e} "
          f"at r = 100 apertures")
    assert worst < 1e-4


# =====================================================================
# 8: statistics toolbox against quadrature and null calibration
# =====================================================================

def _t_density(x, df):
    c = math.exp(math.lgamma((df + 1) / 2.0) - math.lgamma(df / 2.0)) \
        / math.sqrt(df * math.pi)
    return c * (1.0 + x * x / df) ** (-(df + 1) / 2.0)


def _f_density(x, d1, d2):
    if x <= 0.0:
        return 0.0
    log_beta = (math.lgamma(d1 / 2.0) + math.lgamma(d2 / 2.0)
                - math.lgamma((d1 + d2) / 2.0))
    log_num = (0.5 * d1 * math.log(d1 / d2) + (0.5 * d1 - 1.0) * math.log(x)
               - 0.5 * (d1 + d2) * math.log(1.0 + d1 * x / d2))
    return math.exp(log_num - log_beta)


_QUAD_OPTS = {"epsabs": 1e-13, "epsrel": 1e-13, "limit": 200}


def _t_cdf_oracle(t, df):
    # integrate away from the symmetry point so the interval stays finite
    if t >= 0.0:
        val, err = scipy.integrate.quad(_t_density, 0.0, t, args=(df,),
                                        **_QUAD_OPTS)
        return 0.5 + val, err
    val, err = scipy.integrate.quad(_t_density, t, 0.0, args=(df,),
                                    **_QUAD_OPTS)
    return 0.5 - val, err


def test_criterion_08_statistics_toolbox():
    # CDFs vs direct density quadrature
    t_points = [(-4.5, 3), (-2.0, 3), (-0.5, 3), (1.0, 3), (3.5, 3),
                (-3.0, 7), (-1.0, 7), (0.5, 7), (2.0, 7), (4.0, 7),
                (-2.5, 19), (-0.8, 19), (0.3, 19), (1.7, 19), (3.0, 19),
                (-1.5, 49), (-0.2, 49), (0.9, 49), (2.2, 49), (5.0, 49)]
    worst_t = 0.0
    for t, df in t_points:
        oracle, err = _t_cdf_oracle(t, df)
        assert err < 1e-10
        worst_t = max(worst_t, abs(t_cdf(t, df) - oracle))
    f_points = [(0.1, 2, 8), (0.5, 2, 8), (1.0, 2, 8), (2.5, 2, 8),
                (6.0, 2, 8), (0.2, 5, 12), (0.8, 5, 12), (1.5, 5, 12),
                (3.0, 5, 12), (8.0, 5, 12), (0.3, 3, 30), (0.9, 3, 30),
                (2.0, 3, 30), (4.5, 3, 30), (10.0, 3, 30), (0.4, 10, 10),
                (1.0, 10, 10), (1.8, 10, 10), (3.5, 10, 10), (7.0, 10, 10)]
    worst_f = 0.0
    for x, d1, d2 in f_points:
        oracle, err = scipy.integrate.quad(_f_density, 0.0, x, args=(d1, d2),
                                           **_QUAD_OPTS)
        assert err < 1e-10
        worst_f = max(worst_f, abs(f_cdf(x, d1, d2) - oracle))

    # null calibration: p-values of a true-null paired test are uniform
    rng = np.random.default_rng(MASTER_SEED + 8)
    pvals = np.sort([
        paired_t_test(rng.standard_normal(50), rng.standard_normal(50)).p_value
        for _ in range(1000)
    ])
    n = pvals.size
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    ks = float(np.max(np.maximum(np.abs(grid_hi - pvals),
                                 np.abs(pvals - grid_lo))))

    # two-group ANOVA collapses to the squared pooled two-sample t
    a = rng.standard_normal(12) + 0.3
    b = rng.standard_normal(15)
    na, nb = a.size, b.size
    sp2 = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    t_pooled = (a.mean() - b.mean()) / math.sqrt(sp2 * (1.0 / na + 1.0 / nb))
    f_stat = one_way_anova([a, b]).statistic
    ident = abs(f_stat - t_pooled**2)

    print(f"\n  cdf worst errors: t {worst_t:.3e}, F {worst_f:.3e}; "
          f"null KS {ks:.4f}; F=t^2 gap {ident:.3e}")
    assert worst_t < 1e-8
    assert worst_f < 1e-8
    assert ks < 0.05
    assert ident < 1e-9


# =====================================================================
# 9: thread count never changes the result file
# =====================================================================

def test_criterion_09_parallel_reproducibility(tmp_path):
    cfg = preset_config("desk_tiny")
    cfg.optimizer.max_iters = 6
    cfg.experiment.trials = 4
    cfg.experiment.algorithms = ("fp", "conv_noma")
    plan = make_plan(cfg, sweep_axis="csi_eps", sweep_values=(0.0, 0.1))

    blobs = []
    for threads in (1, 4, 8):
        rows = run_experiment(plan, threads=threads)
        path = tmp_path / f"threads_{threads}.records"
        write_records(rows, path)
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]
    print(f"\n  identical record files ({len(blobs[0])} bytes) "
          f"at 1/4/8 threads")


# =====================================================================
# 10: CSI error degrades every algorithm, direction-checked
# =====================================================================

def test_criterion_10_impairment_degradation():
    def scenario(eps):
        cfg = preset_config("desk_tiny")
        cfg.optimizer.max_iters = 15
        cfg.experiment.trials = 200
        cfg.impairments.csi_eps = eps
        return cfg

    rows_clean = run_experiment(make_plan(scenario(0.0)), threads=4)
    rows_noisy = run_experiment(make_plan(scenario(0.2)), threads=4)

    def by_alg(rows):
        out = {}
        for r in rows:
            if not r.failed:
                out.setdefault(r.algorithm, {})[r.trial_index] = r.sum_rate
        return out

    clean, noisy = by_alg(rows_clean), by_alg(rows_noisy)
    print("")
    for alg in sorted(clean):
        common = sorted(set(clean[alg]) & set(noisy[alg]))
        a = np.array([noisy[alg][i] for i in common])
        b = np.array([clean[alg][i] for i in common])
        test = paired_t_test(a, b)
        retained = 100.0 * a.mean() / b.mean()
        print(f"  {alg}: retains {retained:.1f}% of the clean sum rate "
              f"(t={test.statistic:.2f}, p={test.p_display()}, n={a.size})")
        assert a.mean() < b.mean()
        assert test.p_value < 0.01
