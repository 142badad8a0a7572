import json

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.stats import special_ortho_group

from toric_memory.bound import (
    BoundCurve,
    BoundEvaluator,
    SingularCovarianceError,
    compute_Bn,
    default_sites,
    det_quarter_term,
    eigenphases,
    gaussian_overlap,
    magnetization_bound,
    site_term,
    trace_bound_term,
)
from toric_memory.fermion import build_h, reference_covariance
from toric_memory.model import CouplingModel, build_uniform, flip_site


def random_model(n, seed):
    rng = np.random.default_rng(seed)
    return CouplingModel(n, rng.uniform(0.5, 1.5, n), rng.uniform(-0.4, 0.4, n))


@pytest.mark.parametrize("t", [0.0, 1.0, 25.0])
def test_Bn_unperturbed_is_minus_identity(t):
    b = compute_Bn(build_uniform(6, 1.0, 0.0), 2, t)
    np.testing.assert_allclose(b, -np.eye(12), atol=1e-12)


def test_Bn_at_zero_time():
    np.testing.assert_allclose(compute_Bn(random_model(7, 0), 4, 0.0), -np.eye(14), atol=1e-12)


def test_Bn_matches_dense_expm():
    m = build_uniform(6, 1.0, 0.3)
    h, hn, h0 = build_h(m), build_h(flip_site(m, 1)), reference_covariance(6)
    t = 2.0
    e = lambda a, s: sla.expm(2 * a * s)  # noqa: E731
    direct = e(h, t) @ e(hn, -t) @ h0 @ e(hn, t) @ e(h, -t) @ h0
    np.testing.assert_allclose(compute_Bn(m, 1, t), direct, atol=1e-9)


def test_eigenphases_trivial():
    np.testing.assert_allclose(eigenphases(-np.eye(8)), np.pi)
    np.testing.assert_allclose(eigenphases(np.eye(8)), 0.0)


def test_eigenphases_random_rotation():
    b = special_ortho_group.rvs(8, random_state=3)
    theta = eigenphases(b)
    assert theta.shape == (4,)
    assert np.all((theta >= 0) & (theta <= np.pi))
    expected = np.sort(np.linalg.eigvals(b))
    got = np.sort(np.concatenate([np.exp(1j * theta), np.exp(-1j * theta)]))
    np.testing.assert_allclose(got, expected, atol=1e-9)


def test_eigenphases_rejects_non_orthogonal():
    with pytest.raises(ValueError):
        eigenphases(2 * np.eye(4))


def test_det_quarter_term_examples():
    assert det_quarter_term([np.pi] * 5) == pytest.approx(1.0)
    assert det_quarter_term([0.0, np.pi, 1.0]) == 0.0
    assert det_quarter_term([np.pi / 2, np.pi / 2]) == pytest.approx(0.25**0.25, rel=1e-12)
    # deep underflow returns 0 rather than nan
    assert det_quarter_term(np.full(100000, 1e-3)) == 0.0


def test_det_quarter_term_matches_determinant():
    b = special_ortho_group.rvs(10, random_state=11)
    direct = abs(np.linalg.det(0.5 * (b - np.eye(10)))) ** 0.25
    assert det_quarter_term(eigenphases(b)) == pytest.approx(direct, rel=1e-9)


@pytest.mark.parametrize("model", [build_uniform(12, 0.7, 0.0), build_uniform(1000, 1.0, 0.0)])
def test_bound_unperturbed_is_one(model):
    for t in (0.0, 3.0, 500.0):
        assert magnetization_bound(model, t) == pytest.approx(1.0, abs=1e-10)


def test_bound_at_zero_time():
    assert magnetization_bound(random_model(9, 1), 0.0) == pytest.approx(1.0, abs=1e-12)


def test_uniform_site_independence():
    m = build_uniform(8, 1.0, 0.3)
    terms = [det_quarter_term(eigenphases(compute_Bn(m, n, 3.0))) for n in range(1, 9)]
    np.testing.assert_allclose(terms, terms[0], atol=1e-10)
    assert magnetization_bound(m, 3.0) == pytest.approx(np.mean(terms), abs=1e-10)
    all_sites = BoundEvaluator(m, range(1, 9)).evaluate(3.0)
    np.testing.assert_allclose(all_sites.terms, terms[0], atol=1e-10)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fast_route_matches_eigenphases(seed):
    m = random_model(10, seed)
    for t in (0.4, 7.0, 60.0):
        assert magnetization_bound(m, t) == pytest.approx(magnetization_bound(m, t, method="eigen"), abs=1e-10)
        for n in (1, 5, 10):
            tr = np.trace(compute_Bn(m, n, t))
            assert trace_bound_term(m, n, t) == pytest.approx(np.exp(-(tr + 20) / 16), abs=1e-10)


def test_bound_range_and_orthogonality():
    m = random_model(16, 5)
    for t in np.linspace(0, 100, 11):
        v = magnetization_bound(m, t)
        assert 0 <= v <= 1 + 1e-12
        b = compute_Bn(m, 3, t)
        np.testing.assert_allclose(b.T @ b, np.eye(32), atol=1e-9)
        assert np.isrealobj(b)


def test_trace_term_examples():
    assert trace_bound_term(build_uniform(8, 1.0, 0.0), 2, 5.0) == pytest.approx(1.0)
    assert trace_bound_term(random_model(8, 3), 2, 0.0) == pytest.approx(1.0)
    m = build_uniform(8, 1.0, 0.3)
    assert site_term(m, 1, 3.0) <= trace_bound_term(m, 1, 3.0) + 1e-9


def test_default_site_selection():
    assert list(default_sites(build_uniform(500, 1, 0.2))) == [1]
    assert list(default_sites(random_model(10, 0))) == list(range(1, 11))
    big = default_sites(random_model(300, 0))
    assert len(big) == 64 and big[0] == 1 and np.all(np.diff(big) > 0) and big[-1] <= 300


def test_subsampled_bound_reports_stderr():
    m = random_model(300, 4)
    point = BoundEvaluator(m).evaluate(40.0)
    assert point.stderr > 0 and len(point.terms) == 64
    assert BoundEvaluator(random_model(20, 4)).evaluate(40.0).stderr == 0.0


# Gaussian overlaps. Covariances use M_jk = i<c_j c_k>; for one qubit
# i c_1 c_2 = X, so |+> has M = [[0, 1], [-1, 0]] and |0> has M = 0.


def single_mode(gamma):
    return np.array([[0.0, gamma], [-gamma, 0.0]])


def test_overlap_orthogonal_states():
    assert gaussian_overlap(single_mode(1.0), single_mode(-1.0)) == pytest.approx(0.0, abs=1e-15)
    plus2 = reference_covariance(2)
    assert gaussian_overlap(plus2, -plus2) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("gamma", [0.1, 0.5, 0.9, 1.0])
def test_overlap_single_mode_purity(gamma):
    assert gaussian_overlap(single_mode(gamma), single_mode(gamma)) == pytest.approx(0.5 * (1 + gamma**2), rel=1e-12)


def test_overlap_zero_against_plus():
    assert gaussian_overlap(single_mode(1.0), single_mode(0.0)) == pytest.approx(0.5)


def test_overlap_singular_first_argument():
    with pytest.raises(SingularCovarianceError, match="M1"):
        gaussian_overlap(single_mode(0.0), single_mode(1.0))


def test_overlap_ghz_with_itself():
    h0 = reference_covariance(5)
    assert gaussian_overlap(h0, h0) == pytest.approx(1.0)


def test_bound_curve_csv_round_trip():
    curve = BoundCurve([0.0, 1.5, 3.0], [1.0, 0.9, 0.8], [1.0, 0.95, 0.9], model={"kind": "uniform"})
    text = curve.to_csv()
    assert text.splitlines()[0] == "time,det_bound,trace_bound,stderr"
    back = BoundCurve.from_csv(text)
    np.testing.assert_array_equal(back.det_bound, curve.det_bound)
    np.testing.assert_array_equal(back.trace_bound, curve.trace_bound)
    again = BoundCurve.from_dict(json.loads(curve.to_json()))
    assert again.model == {"kind": "uniform"}


def test_bound_curve_rejects_unsorted_times():
    with pytest.raises(ValueError):
        BoundCurve([0.0, 2.0, 1.0], [1, 1, 1])
