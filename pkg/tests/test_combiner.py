import numpy as np
import pytest

from pilotforge import matlin
from pilotforge.channel import complex_normal
from pilotforge.combiner import (
    combiner_objective,
    fully_digital,
    grtm_combiner,
    magiq,
    project_feasible,
    unimodular_dictionary,
    weight,
)
from pilotforge.errors import DictionaryExhausted, SingularReducedGram
from pilotforge.estimator import UNCONSTRAINED, UNIMODULAR


def random_psd(rng, n):
    x = complex_normal(rng, (n, n))
    return x @ x.conj().T


class TestWeight:
    def test_identity_combiner_gives_full_trace(self):
        rng = np.random.default_rng(0)
        q = random_psd(rng, 4)
        assert weight(q, np.eye(4)) == pytest.approx(np.trace(q).real, rel=1e-10)

    def test_top_eigenvector_row_gives_top_eigenvalue(self):
        rng = np.random.default_rng(1)
        q = random_psd(rng, 5)
        lam = matlin.herm_eig(q).values
        w_row = fully_digital(q, 1)
        assert weight(q, w_row) == pytest.approx(lam[0], rel=1e-10)

    def test_two_chain_fully_digital_on_diagonal(self):
        q = np.diag([3.0, 2.0, 1.0])
        assert weight(q, fully_digital(q, 2)) == pytest.approx(5.0, rel=1e-10)

    def test_upper_bound_and_row_space_invariance(self):
        rng = np.random.default_rng(2)
        q = random_psd(rng, 6)
        lam = matlin.herm_eig(q).values
        for r in (1, 2, 3):
            w_mat = complex_normal(rng, (r, 6))
            w_val = weight(q, w_mat)
            assert w_val <= lam[:r].sum() + 1e-8 * lam[:r].sum()
            t = complex_normal(rng, (r, r)) + 2 * np.eye(r)
            assert weight(q, t @ w_mat) == pytest.approx(w_val, rel=1e-8)

    def test_singular_reduced_gram(self):
        q = np.eye(3)
        w_mat = np.array([[1.0, 0, 0], [1.0, 0, 0]])  # duplicated row
        with pytest.raises(SingularReducedGram):
            weight(q, w_mat)


class TestFullyDigital:
    def test_diagonal_selects_leading_axes(self):
        q = np.diag([3.0, 2.0, 1.0])
        w_mat = fully_digital(q, 2)
        np.testing.assert_allclose(np.abs(w_mat), np.eye(3)[:2], atol=1e-12)

    def test_full_set_is_unitary_with_full_trace(self):
        rng = np.random.default_rng(3)
        q = random_psd(rng, 4)
        w_mat = fully_digital(q, 4)
        np.testing.assert_allclose(w_mat @ w_mat.conj().T, np.eye(4), atol=1e-10)
        assert weight(q, w_mat) == pytest.approx(np.trace(q).real, rel=1e-10)

    def test_weight_equals_partial_eigenvalue_sum(self):
        rng = np.random.default_rng(4)
        q = random_psd(rng, 6)
        lam = matlin.herm_eig(q).values
        for n in (1, 3, 5):
            assert weight(q, fully_digital(q, n)) == pytest.approx(lam[:n].sum(), rel=1e-9)


class TestProjectFeasible:
    def test_unconstrained_identity_map(self):
        rng = np.random.default_rng(5)
        a = complex_normal(rng, (2, 3))
        np.testing.assert_allclose(project_feasible(a, UNCONSTRAINED), a)

    def test_unimodular_keeps_phase(self):
        a = np.array([[3.0 * np.exp(1j * np.pi / 4)]])
        out = project_feasible(a, UNIMODULAR)
        assert out[0, 0] == pytest.approx(np.exp(1j * np.pi / 4))

    def test_zero_maps_to_one(self):
        out = project_feasible(np.array([[0.0, 2.0j]]), UNIMODULAR)
        assert out[0, 0] == pytest.approx(1.0)
        assert out[0, 1] == pytest.approx(1.0j)


class TestMagiq:
    def test_unconstrained_converges_immediately(self):
        rng = np.random.default_rng(6)
        q = random_psd(rng, 5)
        u_star = fully_digital(q, 2)
        w_mat, state = magiq(u_star, UNCONSTRAINED)
        assert state.iterations == 1
        assert state.gap == pytest.approx(0.0, abs=1e-20)
        np.testing.assert_allclose(w_mat, u_star)
        assert state.converged

    def test_single_row_closed_form(self):
        u_star = np.array([[1.0, 1.0j]]) / np.sqrt(2.0)
        w_mat, state = magiq(u_star, UNIMODULAR, max_iter=50)
        np.testing.assert_allclose(w_mat, np.array([[1.0, 1.0j]]), atol=1e-12)
        expected_gap = 2.0 * (1.0 - 1.0 / np.sqrt(2.0)) ** 2
        assert state.gap == pytest.approx(expected_gap, rel=1e-12)
        assert not state.converged  # stalls at the quantization floor
        # oracle: scan the 1x1 unitary phase for the best achievable gap
        best = np.inf
        for theta in np.linspace(0.0, 2.0 * np.pi, 20_001):
            rotated = np.exp(1j * theta) * u_star
            best = min(best, np.linalg.norm(rotated - project_feasible(rotated, UNIMODULAR)) ** 2)
        assert state.gap == pytest.approx(best, rel=1e-6)

    def test_gap_trace_monotone_on_random_input(self):
        rng = np.random.default_rng(7)
        for trial in range(5):
            q = random_psd(rng, 8)
            u_star = fully_digital(q, 4)
            _, state = magiq(u_star, UNIMODULAR)
            trace = np.array(state.gap_trace)
            assert np.all(np.diff(trace) <= 1e-12)
            defect = matlin.frob(state.T.conj().T @ state.T - np.eye(4))
            assert defect <= 1e-9

    def test_rejects_bad_threshold(self):
        with pytest.raises(ValueError):
            magiq(np.eye(2), UNCONSTRAINED, threshold=0.0)


class TestGrtm:
    def test_single_chain_matches_exhaustive_scan(self):
        rng = np.random.default_rng(8)
        q = random_psd(rng, 5)
        dictionary = unimodular_dictionary(5, 40, rng)
        chosen = grtm_combiner(q, 1, dictionary)
        scores = [weight(q, row[None, :]) for row in dictionary]
        best = dictionary[int(np.argmax(scores))]
        np.testing.assert_allclose(chosen[0], best)

    def test_recovers_eigen_sum_when_dictionary_spans_top_eigenvectors(self):
        # circulant statistics have unit-modulus eigenvectors, so an exact
        # phase dictionary can reach the unconstrained optimum
        n = 6
        f = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / np.sqrt(n)
        lam = np.array([5.0, 3.0, 2.0, 1.0, 0.5, 0.25])
        q = matlin.hermitize(f @ np.diag(lam) @ f.conj().T)
        rng = np.random.default_rng(9)
        dictionary = np.vstack([np.sqrt(n) * f.conj().T, unimodular_dictionary(n, 20, rng)])
        w_mat = grtm_combiner(q, 2, dictionary)
        assert weight(q, w_mat) == pytest.approx(lam[0] + lam[1], rel=1e-8)

    def test_weight_grows_monotonically(self):
        rng = np.random.default_rng(10)
        q = random_psd(rng, 6)
        dictionary = unimodular_dictionary(6, 50, rng)
        values = []
        for r in (1, 2, 3, 4):
            values.append(weight(q, grtm_combiner(q, r, dictionary)))
        assert np.all(np.diff(values) >= -1e-9)

    def test_exhausted_dictionary(self):
        q = np.eye(3)
        row = np.exp(1j * np.array([0.1, 0.2, 0.3]))
        dictionary = np.vstack([row, row])  # second step has no new direction
        with pytest.raises(DictionaryExhausted):
            grtm_combiner(q, 2, dictionary)

    def test_dictionary_rows_are_unimodular(self):
        rng = np.random.default_rng(11)
        d = unimodular_dictionary(4, 10, rng)
        np.testing.assert_allclose(np.abs(d), np.ones((10, 4)), atol=1e-12)


class TestCombinerObjective:
    def test_equals_weight(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            q = random_psd(rng, 5)
            w_mat = complex_normal(rng, (2, 5))
            assert combiner_objective(q, w_mat) == pytest.approx(
                weight(q, w_mat), rel=1e-10
            )

    def test_invariant_under_invertible_left_factor(self):
        rng = np.random.default_rng(13)
        q = random_psd(rng, 4)
        w_mat = complex_normal(rng, (2, 4))
        t = complex_normal(rng, (2, 2)) + 3 * np.eye(2)
        assert combiner_objective(q, t @ w_mat) == pytest.approx(
            combiner_objective(q, w_mat), rel=1e-8
        )

    def test_identity_gives_trace(self):
        rng = np.random.default_rng(14)
        q = random_psd(rng, 3)
        assert combiner_objective(q, np.eye(3)) == pytest.approx(np.trace(q).real, rel=1e-10)
