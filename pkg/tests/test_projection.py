import logging

import numpy as np
import pytest

from mdfusion import (
    CorpusError,
    FunctionClass,
    FusionPlan,
    KernelConfig,
    TrainingCorpus,
    check_innovation_vanishes,
    cross_domain,
    fit_class,
    fit_kernel,
    fit_linear,
    fuse,
    project,
    project_split_half,
    shared_representation,
    side_info_linear_nonlinear,
)
from mdfusion.oracle import (
    DiscreteJoint,
    GaussianModel,
    build_corpus,
    exact_corpus,
    exact_regret,
    exact_regret_distance,
    exact_single_domain,
    gaussian_conditionals,
    preset,
    random_joint,
)

Z, L, NP = FunctionClass.zero(), FunctionClass.linear(), FunctionClass.nonparametric()
SHARP = KernelConfig(bandwidth_constant=1e-3)
WIDE = KernelConfig(bandwidth_constant=1.0)
SIDE_INFO_SIGMA = np.array([[1.0, 0.6, 0.3], [0.6, 1.0, 0.4], [0.3, 0.4, 1.0]])


@pytest.fixture(scope="module")
def corpus():
    return build_corpus(preset("feasible-gaussian"), 1000, 1000, 1000, seed=21)


def test_project_of_x1_only_predictor_is_identity(corpus):
    rho_m = fuse(corpus, FusionPlan(L, Z))
    q = np.linspace(-2, 2, 11)[:, None]
    np.testing.assert_allclose(project(rho_m, corpus).predict(q), rho_m.predict(q, np.zeros_like(q)), atol=1e-3)


def test_project_deterministic_coupling():
    x = np.linspace(-1, 1, 200)[:, None]
    c = TrainingCorpus(x[:0], x[:0], x, x, x, x)
    rho_m = fuse(c, FusionPlan(Z, L))
    np.testing.assert_allclose(project(rho_m, c).predict([[0.3], [-0.7]]), [[0.3], [-0.7]], atol=1e-6)


@pytest.mark.parametrize("seed", range(8))
def test_project_matches_exact_conditional_mean(seed):
    dj = random_joint(seed, rational=True)
    c = exact_corpus(dj, repeats=20)
    for a, b in [(L, L), (NP, L)]:
        rho_s = project(fuse(c, FusionPlan(a, b), SHARP), c, SHARP)
        np.testing.assert_allclose(rho_s.predict(dj.x1), exact_single_domain(dj, a, b), atol=1e-6)


def test_project_requires_two_domain_predictor(corpus):
    with pytest.raises(CorpusError):
        project(fit_linear(corpus.labeled1_x, corpus.labeled1_y), corpus)


def test_project_warns_on_small_unlabeled_set(caplog):
    c = build_corpus(preset("feasible-gaussian"), 20, 20, 10, seed=0)
    with caplog.at_level(logging.WARNING):
        project(fuse(c, FusionPlan(L, L)), c)
    assert "poorly estimated" in caplog.text


def test_split_half_close_to_full(corpus):
    q = np.linspace(-1.5, 1.5, 7)[:, None]
    plan = FusionPlan(L, L)
    full = project(fuse(corpus, plan, WIDE), corpus, WIDE).predict(q)
    half = project_split_half(corpus, plan, WIDE).predict(q)
    np.testing.assert_allclose(half, full, atol=0.05)


def test_shared_representation_linear_commutes(corpus):
    rho = shared_representation(corpus, L, WIDE)
    psi = fit_linear(corpus.labeled2_x, corpus.labeled2_y, domain=2)
    xi = fit_kernel(corpus.unlabeled_x1, corpus.unlabeled_x2, WIDE)
    q = np.linspace(-2, 2, 9)[:, None]
    np.testing.assert_allclose(rho.predict(q), xi.predict(q) @ psi.coef.T, atol=1e-6)


def test_shared_representation_nonparametric_differs_from_naive():
    dj = DiscreteJoint.from_atoms([(0.0, -1.0, 1.0), (0.0, 1.0, 1.0), (1.0, 0.0, 0.0)], [0.25, 0.25, 0.5])
    c = exact_corpus(dj, repeats=20)
    c = TrainingCorpus(c.labeled1_x[:0], c.labeled1_y[:0], c.labeled2_x, c.labeled2_y, c.unlabeled_x1, c.unlabeled_x2)
    rho = shared_representation(c, NP, SHARP)
    nested = dj.conditional_mean(dj.conditional_mean(dj.y, 2), 1)
    np.testing.assert_allclose(rho.predict(dj.x1), nested, atol=1e-6)
    # naive plug-in: E[Y | X2 = E[X2 | X1]] is 0 at x1 = 0, the nested mean is 1
    assert nested[0, 0] == pytest.approx(1.0)


def test_shared_representation_independent_domains_is_constant():
    x1, x2 = np.meshgrid([0.0, 1.0, 2.0], [-1.0, 1.0])
    x1, x2 = x1.reshape(-1, 1), x2.reshape(-1, 1)
    y = 0.7 * x2
    c = TrainingCorpus(x1[:0], y[:0], x2, y, x1, x2)
    rho = shared_representation(c, L)
    np.testing.assert_allclose(rho.predict([[0.0], [0.5], [2.0]]), 0.0, atol=1e-10)


def test_shared_representation_needs_labeled_domain_two(corpus):
    c = TrainingCorpus(corpus.labeled1_x, corpus.labeled1_y, np.zeros((0, 1)), np.zeros((0, 1)), corpus.unlabeled_x1, corpus.unlabeled_x2)
    with pytest.raises(CorpusError, match="shared-representation requires labeled domain-2 examples"):
        shared_representation(c, L)


def test_cross_domain_returns_single_domain_fit(corpus):
    q = np.linspace(-2, 2, 9)[:, None]
    for cls in (L, FunctionClass.basis(["identity", "sin"]), NP):
        np.testing.assert_array_equal(
            cross_domain(corpus, cls).predict(q), fit_class(corpus.labeled1_x, corpus.labeled1_y, cls).predict(q)
        )
    np.testing.assert_array_equal(cross_domain(corpus, Z).predict(q), np.zeros_like(q))


def test_cross_domain_agrees_with_projected_degenerate_fusion(corpus):
    q = np.linspace(-2, 2, 9)[:, None]
    projected = project(fuse(corpus, FusionPlan(L, Z)), corpus)
    np.testing.assert_allclose(projected.predict(q), cross_domain(corpus, L).predict(q), atol=1e-3)


def test_side_info_predictable_x1():
    rng = np.random.default_rng(4)
    n = 2000

    def draw():
        x = rng.uniform(-1, 1, (n, 1))
        return x, x.copy(), np.sin(2 * x) + 0.05 * rng.standard_normal((n, 1))

    a1, _, ya = draw()
    _, b2, yb = draw()
    u1, u2, _ = draw()
    pred = side_info_linear_nonlinear(TrainingCorpus(a1, ya, b2, yb, u1, u2))
    q = np.linspace(-0.8, 0.8, 9)[:, None]
    np.testing.assert_allclose(pred.predict(q), np.sin(2 * q), atol=0.05)


def test_side_info_gaussian_gain():
    g = GaussianModel(SIDE_INFO_SIGMA)
    c = build_corpus(g, 10_000, 10_000, 10_000, seed=2)
    pred = side_info_linear_nonlinear(c, WIDE)
    assert abs(pred.gain[0, 0] - gaussian_conditionals(g).side_info.gain[0, 0]) <= 0.05


def test_side_info_independent_label():
    g = GaussianModel(np.array([[1.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    c = build_corpus(g, 3000, 3000, 3000, seed=3)
    pred = side_info_linear_nonlinear(c, WIDE)
    q = np.linspace(-1.5, 1.5, 7)[:, None]
    assert np.abs(pred.predict(q)).max() <= 0.1


def test_side_info_stage_requirements(corpus):
    c = TrainingCorpus(corpus.labeled1_x, corpus.labeled1_y, corpus.labeled2_x[:1], corpus.labeled2_y[:1], corpus.unlabeled_x1, corpus.unlabeled_x2)
    with pytest.raises(CorpusError):
        side_info_linear_nonlinear(c)


def test_vanishes_for_all_functions_class(corpus):
    for b in (L, FunctionClass.basis(["identity", "square"])):
        rep = check_innovation_vanishes(corpus, NP, b, WIDE)
        assert rep.vanished and rep.innovation_norm == 0.0


def test_vanishes_for_gaussian_linear():
    # the projected innovation is pure kernel noise of order 1/n; n = 1e4 keeps it well below tolerance
    big = build_corpus(preset("feasible-gaussian"), 10_000, 10_000, 10_000, seed=21)
    rep = check_innovation_vanishes(big, L, L, WIDE)
    assert rep.vanished
    assert 0.0 <= rep.innovation_norm <= rep.vanish_tol


def test_does_not_vanish_on_nonlinear_counterexample():
    # X2 = X1 uniform on {-1, 0, 1}: E[X2^2 | X1] = X1^2, whose best linear fit is 0
    dj = DiscreteJoint.from_atoms([(v, v, v * v) for v in (-1.0, 0.0, 1.0)], [1 / 3, 1 / 3, 1 / 3])
    rep = check_innovation_vanishes(exact_corpus(dj, repeats=20), L, FunctionClass.basis(["square"]), SHARP)
    assert not rep.vanished
    assert rep.innovation_norm == pytest.approx(2 / 3, abs=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_regret_is_distance_to_conditional_mean(seed):
    dj = random_joint(seed)
    rng = np.random.default_rng(seed)
    values = dj.conditional_mean(rng.standard_normal(dj.y.shape), 1)
    assert exact_regret(dj, values, 1) == pytest.approx(exact_regret_distance(dj, values, 1), abs=1e-10)
