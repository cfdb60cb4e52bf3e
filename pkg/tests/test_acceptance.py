"""Acceptance suite: one group of tests per criterion, at the stated tolerances.

Run ``pytest tests/test_acceptance.py`` to get one PASS/FAIL line per
criterion in the terminal summary.
"""

import time

import numpy as np
import pytest

from mdfusion import (
    FunctionClass,
    FusionPlan,
    KernelConfig,
    check_innovation_vanishes,
    cross_domain,
    fit_class,
    fit_kernel,
    fuse,
    fuse_linear_linear,
    fuse_plmmse,
    fuse_semiparametric,
    project,
)
from mdfusion.oracle import (
    DiscreteJoint,
    GaussianModel,
    build_corpus,
    check_membership,
    check_membership_mc,
    class_generators,
    exact_corpus,
    exact_minimax,
    exact_mse,
    exact_regret,
    exact_single_domain,
    family_of,
    gaussian_conditionals,
    preset,
    random_joint,
    reflect,
)
from mdfusion.oracle.gaussian import FEASIBLE_SIGMA, INFEASIBLE_SIGMA
from mdfusion.oracle.properties import class_pairs

SEEDS = range(50)
PAIRS = class_pairs()
SHARP = KernelConfig(bandwidth_constant=1e-3)
WIDE = KernelConfig(bandwidth_constant=1.0)
Z, L, NP = FunctionClass.zero(), FunctionClass.linear(), FunctionClass.nonparametric()


def instances():
    for seed in SEEDS:
        dj = random_joint(seed)
        assert 3 <= dj.size <= 8
        yield seed, dj


def brute_conditional_mean(x, values, probs):
    """Per-atom E[values | x] by explicit grouping."""
    out = np.empty_like(values)
    for k in range(x.shape[0]):
        same = [j for j in range(x.shape[0]) if tuple(x[j]) == tuple(x[k])]
        w = probs[same]
        out[k] = (w[:, None] * values[same]).sum(axis=0) / w.sum()
    return out


# ---- 1 ----------------------------------------------------------------------------


@pytest.mark.criterion(1)
def test_criterion_01_minimax_invariance():
    start = time.perf_counter()
    checked = 0
    for seed, dj in instances():
        for name, ca, cb in PAIRS:
            rho = exact_minimax(dj, ca, cb)
            values = rho.at_atoms(dj)
            refl = reflect(dj, rho)
            rho_r = exact_minimax(refl, ca, cb)
            gap = np.max(np.abs(rho_r._predict(dj.x1, dj.x2) - values))
            mse_gap = abs(exact_mse(dj, values) - exact_mse(refl, rho_r.at_atoms(refl)))
            assert gap <= 1e-10, (seed, name, gap)
            assert mse_gap <= 1e-10, (seed, name, mse_gap)
            checked += 1
    assert checked == 200
    assert time.perf_counter() - start < 10


# ---- 2 ----------------------------------------------------------------------------


@pytest.mark.criterion(2)
def test_criterion_02_reflection_membership():
    for seed, dj in instances():
        for name, ca, cb in PAIRS:
            verdict = check_membership(reflect(dj, exact_minimax(dj, ca, cb)), family_of(dj, ca, cb), tol=1e-9)
            assert verdict.member, (seed, name, verdict.residuals)
            assert set(verdict.residuals) == {"A-optimality", "B-optimality", "marginal", "second-moment"}


# ---- 3 ----------------------------------------------------------------------------


def check_orthogonality_and_pythagoras(dj, ca, cb, values):
    n = dj.dims[2]
    resid = dj.y - values
    for cls, x, which in ((ca, dj.x1, 1), (cb, dj.x2, 2)):
        gens = class_generators(cls, x, n, which).evaluate(x)
        cross = dj.expect(np.einsum("akd,ad->ak", gens, resid))
        assert np.max(np.abs(cross), initial=0.0) <= 1e-8
    lhs = dj.second_moment_y()
    rhs = float(dj.expect(np.sum(values**2, axis=1))) + exact_mse(dj, values)
    assert abs(lhs - rhs) <= 1e-8


@pytest.mark.criterion(3)
def test_criterion_03_exact_fits():
    for _, dj in instances():
        for _, ca, cb in PAIRS:
            check_orthogonality_and_pythagoras(dj, ca, cb, exact_minimax(dj, ca, cb).at_atoms(dj))


@pytest.mark.criterion(3)
def test_criterion_03_library_fits_on_exact_corpora():
    for seed in range(20):
        dj = random_joint(seed, rational=True)
        corpus = exact_corpus(dj)
        for _, ca, cb in PAIRS:
            values = fuse(corpus, FusionPlan(ca, cb), kernel=SHARP).predict(dj.x1, dj.x2)
            check_orthogonality_and_pythagoras(dj, ca, cb, values)


# ---- 4 ----------------------------------------------------------------------------


@pytest.mark.criterion(4)
def test_criterion_04_semiparametric_equals_direct():
    basis = FunctionClass.basis(["identity", "square"])
    for seed in range(25):
        dj = random_joint(seed, rational=True)
        corpus = exact_corpus(dj, repeats=4)
        pred = fuse_semiparametric(corpus, basis.maps, SHARP)
        direct = exact_minimax(dj, FunctionClass.all_functions(), basis).at_atoms(dj)
        np.testing.assert_allclose(pred.predict(dj.x1, dj.x2), direct, atol=1e-6)


# ---- 5 ----------------------------------------------------------------------------


@pytest.mark.criterion(5)
def test_criterion_05_projection_matches_brute_force():
    for seed in range(25):
        dj = random_joint(seed, rational=True)
        corpus = exact_corpus(dj, repeats=10)
        for _, ca, cb in PAIRS:
            rho_m = exact_minimax(dj, ca, cb).at_atoms(dj)
            expected = brute_conditional_mean(dj.x1, rho_m, dj.probs)
            rho_s = project(fuse(corpus, FusionPlan(ca, cb), SHARP), corpus, SHARP)
            np.testing.assert_allclose(rho_s.predict(dj.x1), expected, atol=1e-6)
            np.testing.assert_allclose(exact_single_domain(dj, ca, cb, "direct"), expected, atol=1e-10)


@pytest.mark.criterion(5)
def test_criterion_05_two_forms_agree():
    for _, dj in instances():
        for _, ca, cb in PAIRS:
            phi_form = exact_single_domain(dj, ca, cb, "phi")
            psi_form = exact_single_domain(dj, ca, cb, "psi")
            np.testing.assert_allclose(phi_form, psi_form, atol=1e-8)


def worst_regret(pair, table):
    """Largest single-domain regret over the joints in ``pair`` of the map x1 -> table[x1]."""
    return max(exact_regret(dj, np.array([table[tuple(x)] for x in dj.x1]), 1) for dj in pair)


@pytest.mark.criterion(5)
def test_criterion_05_regret_optimality_spot_check():
    rng = np.random.default_rng(2024)
    for seed in range(10):
        dj = random_joint(seed)
        for _, ca, cb in PAIRS:
            pair = (dj, reflect(dj, exact_minimax(dj, ca, cb)))
            rho_s = exact_single_domain(dj, ca, cb)
            table = {tuple(x): v for x, v in zip(dj.x1, rho_s)}
            best = worst_regret(pair, table)
            for _ in range(100):
                scale = 10.0 ** rng.uniform(-3, 0)
                alt = {k: v + scale * rng.standard_normal(v.shape) for k, v in table.items()}
                assert best <= worst_regret(pair, alt) + 1e-12


# ---- 6 ----------------------------------------------------------------------------


def linearised(pred, model, n=20_000, seed=0):
    x1, x2, _ = model.sample(n, np.random.default_rng(seed))
    x = np.hstack([x1, x2])
    coef, *_ = np.linalg.lstsq(x, pred.predict(x1, x2), rcond=None)
    return coef.T


@pytest.mark.criterion(6)
def test_criterion_06_gaussian_closed_forms():
    start = time.perf_counter()
    g = GaussianModel(FEASIBLE_SIGMA)
    corpus = build_corpus(g, 10_000, 10_000, 10_000, seed=0)
    ll = fuse_linear_linear(corpus.moments())
    c1, c2 = (t.coef[0, 0] for t in ll.terms)
    assert abs(c1 - 0.1) <= 0.05 and abs(c2 - 0.2) <= 0.05
    rep = gaussian_conditionals(g)
    assert rep.mse["x12"] == pytest.approx(0.95, abs=1e-15)
    pl = fuse_plmmse(corpus, WIDE)
    target = np.hstack(rep.plmmse.coefficients)
    assert np.linalg.norm(linearised(pl, g) - target, 2) <= 0.05
    assert np.linalg.norm(pl.gain - rep.plmmse.gain, 2) <= 0.05
    assert time.perf_counter() - start < 30


# ---- 7 ----------------------------------------------------------------------------


@pytest.mark.criterion(7)
def test_criterion_07_mixture_is_member():
    spec = preset("feasible-gaussian").family_spec()
    x1, x2, y = preset("feasible-mixture").sample(100_000, np.random.default_rng(7))
    verdict = check_membership_mc(x1, x2, y, spec)
    assert verdict.member, verdict.residuals


@pytest.mark.criterion(7)
def test_criterion_07_infeasible_rejected_on_marginal():
    spec = preset("feasible-gaussian").family_spec()
    x1, x2, y = GaussianModel(INFEASIBLE_SIGMA).sample(100_000, np.random.default_rng(8))
    verdict = check_membership_mc(x1, x2, y, spec)
    assert not verdict.member
    assert "marginal" in verdict.failing


# ---- 8 ----------------------------------------------------------------------------


@pytest.mark.criterion(8)
def test_criterion_08_zero_class_b():
    corpus = build_corpus(preset("feasible-gaussian"), 500, 500, 500, seed=1)
    rng = np.random.default_rng(0)
    x1 = rng.standard_normal((100, 1))
    for ca in (L, FunctionClass.basis(["identity", "sin"]), NP):
        pred = fuse(corpus, FusionPlan(ca, Z))
        base = pred.predict(x1, np.zeros_like(x1))
        for _ in range(5):
            np.testing.assert_array_equal(pred.predict(x1, 10 * rng.standard_normal(x1.shape)), base)
        single = fit_class(corpus.labeled1_x, corpus.labeled1_y, ca)
        np.testing.assert_array_equal(cross_domain(corpus, ca).predict(x1), single.predict(x1))
        np.testing.assert_array_equal(base, single.predict(x1))


# ---- 9 ----------------------------------------------------------------------------


@pytest.mark.criterion(9)
def test_criterion_09_vanishing_conditions():
    corpus = build_corpus(preset("feasible-gaussian"), 1000, 1000, 1000, seed=2)
    for cb in (L, FunctionClass.basis(["identity", "square"]), FunctionClass.basis(["sin", "cos"])):
        assert check_innovation_vanishes(corpus, NP, cb, WIDE).vanished
    # zero in population; kernel noise in the estimate is of order 1/n, hence the larger sample
    big = build_corpus(preset("feasible-gaussian"), 10_000, 10_000, 10_000, seed=2)
    assert check_innovation_vanishes(big, L, L, WIDE).vanished
    # X2 = X1 uniform on {-1, 0, 1}: E[X2^2 | X1] = X1^2 has best linear fit 0
    dj = DiscreteJoint.from_atoms([(v, v, v * v) for v in (-1.0, 0.0, 1.0)], [1 / 3, 1 / 3, 1 / 3])
    rep = check_innovation_vanishes(exact_corpus(dj, repeats=20), L, FunctionClass.basis(["square"]), SHARP)
    assert not rep.vanished


# ---- 10 ---------------------------------------------------------------------------


@pytest.mark.criterion(10)
def test_criterion_10_kernel_consistency():
    start = time.perf_counter()
    x = np.linspace(0, 1, 50)
    assert abs(fit_kernel(x, x).predict([[0.5]])[0, 0] - 0.5) <= 1e-6
    rng = np.random.default_rng(10)
    u = rng.uniform(0, 1, 2000)
    k = fit_kernel(u, np.sin(2 * np.pi * u) + 0.05 * rng.standard_normal(2000))
    grid = np.linspace(0, 1, 201)
    err = k.predict(grid[:, None])[:, 0] - np.sin(2 * np.pi * grid)
    assert np.sqrt(np.mean(err**2)) <= 0.05
    assert time.perf_counter() - start < 10
