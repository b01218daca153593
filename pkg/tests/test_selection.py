import numpy as np
import pytest

from gradseek.errors import InvalidArgument, SelectionFailed
from gradseek.estimator import FitConfig, GradientModel, fit, objective
from gradseek.kernel import KernelConfig, eval_dpsi, eval_psi
from gradseek.metrics import gradient_mse
from gradseek.selection import (
    DEFAULT_GRID,
    expand_bandwidth_grid,
    holdout_score,
    kfold_split,
    select_model,
)
from gradseek.synth import preset, sample


def test_kfold_sizes():
    assert sorted(len(s) for s in kfold_split(10, 5, 0)) == [2] * 5
    assert sorted(len(s) for s in kfold_split(10, 3, 0)) == [3, 3, 4]


@pytest.mark.parametrize("n,folds", [(10, 5), (11, 3), (1000, 5), (2, 2), (7, 7)])
def test_kfold_partition(n, folds):
    parts = kfold_split(n, folds, 3)
    allidx = np.concatenate(parts)
    assert np.array_equal(np.sort(allidx), np.arange(n))
    sizes = [len(p) for p in parts]
    assert max(sizes) - min(sizes) <= 1


def test_kfold_deterministic_and_seeded():
    a = kfold_split(50, 5, 1)
    b = kfold_split(50, 5, 1)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    c = kfold_split(50, 5, 2)
    assert not all(np.array_equal(x, y) for x, y in zip(a, c))


@pytest.mark.parametrize("n,folds", [(5, 6), (10, 1), (10, 0)])
def test_kfold_invalid(n, folds):
    with pytest.raises(InvalidArgument):
        kfold_split(n, folds, 0)


def test_holdout_score_trivial_cases():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(60, 2))
    cfg = KernelConfig(x[:6], 0.8)
    assert holdout_score(GradientModel(cfg, np.zeros((6, 2))), x) == 0.0
    model = fit(x, cfg, FitConfig(lam=0.1))
    assert holdout_score(model, x) == objective(model, x)
    with pytest.raises(InvalidArgument):
        holdout_score(model, np.zeros((0, 2)))


def test_holdout_score_matches_loop_oracle():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(40, 3))
    cfg = KernelConfig(rng.normal(size=(7, 3)), 1.2)
    theta = rng.normal(size=(7, 3))
    model = GradientModel(cfg, theta)
    total = 0.0
    for p in x:
        psi, dpsi = eval_psi(p, cfg), eval_dpsi(p, cfg)
        for j in range(3):
            g = sum(theta[i, j] * psi[i, j] for i in range(7))
            dg = sum(theta[i, j] * dpsi[i, j] for i in range(7))
            total += g * g + 2 * dg
    assert holdout_score(model, x) == pytest.approx(total / 40, abs=1e-12)


@pytest.fixture(scope="module")
def gauss_run():
    x, _ = sample(preset("gauss"), 1000, 0)
    model, report = select_model(x, seed=0)
    return x, model, report


def test_default_grid_has_49_candidates(gauss_run):
    _, _, report = gauss_run
    assert len(DEFAULT_GRID) == 7
    np.testing.assert_allclose(DEFAULT_GRID, 10.0 ** np.arange(-2, 1.01, 0.5), rtol=1e-15)
    assert len(report.candidates) == 49
    assert all(len(c.fold_scores) == 5 for c in report.candidates)


def test_report_consistency(gauss_run):
    _, model, report = gauss_run
    scores = [c.score for c in report.candidates]
    assert report.best.score == min(scores)
    for c in report.candidates:
        if np.isfinite(c.score):
            assert c.score == pytest.approx(np.mean(c.fold_scores), abs=1e-12)
    assert model.kernel.sigma == report.best.sigma and model.lam == report.best.lam


def test_selected_not_worse_than_worst_candidate(gauss_run):
    x, model, report = gauss_run
    test, _ = sample(preset("gauss"), 1000, 0, purpose="test")
    truth = lambda z: -z  # noqa: E731
    chosen = gradient_mse(model, truth, test)
    worst = 0.0
    for c in report.candidates:
        if not np.isfinite(c.score):
            continue
        m = fit(x, model.kernel.with_sigma(c.sigma), FitConfig(lam=c.lam))
        worst = max(worst, gradient_mse(m, truth, test))
    assert chosen <= worst


def test_select_is_deterministic():
    x, _ = sample(preset("gmm2"), 300, 4)
    m1, r1 = select_model(x, seed=4)
    m2, r2 = select_model(x, seed=4)
    assert np.array_equal(m1.theta, m2.theta)
    assert [c.score for c in r1.candidates] == [c.score for c in r2.candidates]


def test_single_candidate_is_full_data_fit():
    x, _ = sample(preset("gauss", 2), 300, 5)
    model, report = select_model(x, [0.7], [0.2], seed=5)
    assert len(report.candidates) == 1 and report.selected == 0
    direct = fit(x, model.kernel, FitConfig(lam=0.2))
    np.testing.assert_array_equal(model.theta, direct.theta)


def test_removing_winner_never_lowers_best_score():
    x, _ = sample(preset("gauss"), 300, 6)
    grid = [0.3, 1.0, 3.0]
    _, full = select_model(x, grid, [0.01, 0.1, 1.0], seed=6)
    win = full.best
    pruned_sigmas = [s for s in grid if s != win.sigma]
    _, pruned = select_model(x, pruned_sigmas, [0.01, 0.1, 1.0], seed=6)
    assert pruned.best.score >= win.score


def test_ties_prefer_larger_lambda_then_larger_sigma():
    from gradseek.selection import CvCandidate, _argmin
    cands = [CvCandidate(1.0, 0.1, -1.0, ()), CvCandidate(1.0, 1.0, -1.0, ()),
             CvCandidate(3.0, 1.0, -1.0, ()), CvCandidate(3.0, 0.1, -0.5, ())]
    assert _argmin(cands) == 2


def test_all_failed_raises_with_report():
    x = np.zeros((10, 1))  # every psi vanishes at lambda 0
    with pytest.raises(SelectionFailed) as err:
        select_model(x, [1.0], [0.0], folds=2, centers=np.zeros((2, 1)))
    assert err.value.report is not None
    assert all(not np.isfinite(c.score) for c in err.value.report.candidates)


def test_failed_candidate_scores_infinity():
    x = np.zeros((10, 1))
    _, report = select_model(x, [1.0], [0.0, 1.0], folds=2, centers=np.zeros((2, 1)))
    assert not np.isfinite(report.candidates[0].score)
    assert report.selected == 1


def test_grouped_grid_is_cross_product():
    grid = expand_bandwidth_grid([0.1, 1.0, 10.0], 2)
    assert len(grid) == 9 and (0.1, 10.0) in grid
    assert expand_bandwidth_grid([(0.1, 1.0)], 2) == [(0.1, 1.0)]


def test_empty_and_negative_grids_rejected():
    x = np.zeros((10, 1))
    with pytest.raises(InvalidArgument):
        select_model(x, [], [1.0])
    with pytest.raises(InvalidArgument):
        select_model(x, [1.0], [])
    with pytest.raises(InvalidArgument):
        select_model(x, [1.0], [-1.0])


def test_report_serializes():
    import json
    x, _ = sample(preset("gauss"), 100, 7)
    _, report = select_model(x, [0.01, 1.0], [1e-6, 1.0], seed=7)
    text = json.dumps(report.to_dict())
    assert '"selected_sigma"' in text


def test_fold_without_centers_scores_infinity():
    x = np.arange(10, dtype=float)[:, None]
    with pytest.raises(SelectionFailed):
        select_model(x, [1.0], [1.0], folds=10, center_count=1)


def test_holdout_centers_dropped_per_fold():
    # every sample is a center, so each fold fits on the other folds' centers only
    x, _ = sample(preset("gauss"), 50, 8)
    from gradseek.selection import kfold_split
    _, report = select_model(x, [1.0], [0.1], folds=5, seed=8, center_count=50)
    split = kfold_split(50, 5, 8)
    expected = []
    for hold in split:
        train = np.setdiff1d(np.arange(50), hold)
        cfg = KernelConfig(x[train], 1.0)
        model = fit(x[train], cfg, FitConfig(lam=0.1))
        expected.append(holdout_score(model, x[hold]))
    np.testing.assert_allclose(report.best.fold_scores, expected, rtol=1e-10, atol=1e-12)
