"""Populations, distortion matrices, surrogate machinery, serialization."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from local_update_lab import (
    ClientModel,
    Population,
    QuadraticExample,
    SpectrumBounds,
    WeightScheme,
    distortion_matrix,
    empirical_minimizer,
    eigh,
    loss_value,
    minimizer_distance,
    surrogate_gradient,
    surrogate_hessian,
    surrogate_loss_value,
    surrogate_minimizer,
)
from local_update_lab.bounds import scheme_q_eigenvalues, scheme_qa_eigenvalues
from local_update_lab.errors import (
    ConditioningError,
    DimensionMismatchError,
    InvalidInputError,
    PopulationFormatError,
)
from local_update_lab.matrices import keyed_rng
from local_update_lab.quadratics import dumps_population, loads_population
from local_update_lab.verify import random_population, random_theta


def scalar_client(a, c):
    return ClientModel(a_matrix=np.array([[float(a)]]), center=np.array([float(c)]))


def scalar_pair_population():
    """Two 1-d clients A = (4, 1), c = (1, -1), equal weights."""
    return Population.uniform(
        [scalar_client(4.0, 1.0), scalar_client(1.0, -1.0)],
        bounds=SpectrumBounds(mu=1.0, ell=4.0, c_radius=1.0),
    )


class TestWeightScheme:
    def test_constructors(self):
        assert WeightScheme.first_k(3).size == 3
        assert WeightScheme.first_k(3).weight == 3.0
        last = WeightScheme.last_only(5)
        assert last.size == 5
        assert last.weight == 1.0
        np.testing.assert_array_equal(last.coefficients, [0, 0, 0, 0, 1])
        assert WeightScheme.maml_equivalent(4).size == 9
        np.testing.assert_array_equal(WeightScheme.single().coefficients, [1.0])

    def test_size_ignores_trailing_zeros(self):
        theta = WeightScheme(np.array([0.5, 1.0, 0.0, 0.0]))
        assert theta.size == 2
        assert theta.weight == 1.5

    def test_structure_detection(self):
        assert WeightScheme.first_k(7).structure() == ("uniform_prefix", 7, 1.0)
        assert WeightScheme.last_only(7).structure() == ("last_only", 7, 1.0)
        assert WeightScheme(np.array([0.3, 0.0, 0.9])).structure()[0] == "general"
        # a single positive coefficient is last_only even if scaled
        assert WeightScheme(np.array([0.0, 2.5])).structure() == ("last_only", 2, 2.5)

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            WeightScheme(np.array([0.0, 0.0]))
        with pytest.raises(InvalidInputError):
            WeightScheme(np.array([-1.0, 2.0]))
        with pytest.raises(InvalidInputError):
            WeightScheme(np.array([np.inf]))
        with pytest.raises(InvalidInputError):
            WeightScheme.first_k(0)


class TestClientAndPopulation:
    def test_center_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            ClientModel(a_matrix=np.eye(2), center=np.zeros(3))

    def test_from_examples_moments(self):
        b1 = np.array([[3.0, 1.0], [1.0, 2.0]])
        b2 = np.array([[5.0, -1.0], [-1.0, 4.0]])
        examples = [
            QuadraticExample(b_matrix=b1, center=np.array([1.0, 0.0])),
            QuadraticExample(b_matrix=b2, center=np.array([0.0, -1.0])),
        ]
        client = ClientModel.from_examples(examples)
        np.testing.assert_allclose(client.a_matrix, 0.5 * (b1 + b2), atol=1e-15)
        expected_center = np.linalg.solve(
            0.5 * (b1 + b2), 0.5 * (b1 @ [1.0, 0.0] + b2 @ [0.0, -1.0])
        )
        np.testing.assert_allclose(client.center, expected_center, atol=1e-12)

    def test_inconsistent_examples_rejected(self):
        examples = [QuadraticExample(b_matrix=np.eye(2), center=np.zeros(2))]
        with pytest.raises(InvalidInputError):
            ClientModel(a_matrix=2 * np.eye(2), center=np.zeros(2), examples=examples)

    def test_indefinite_example_matrix_allowed(self):
        # individual B_z may be indefinite; only the mean must satisfy the bounds
        examples = [
            QuadraticExample(b_matrix=np.diag([3.0, -0.5]), center=np.zeros(2)),
            QuadraticExample(b_matrix=np.diag([1.0, 4.5]), center=np.zeros(2)),
        ]
        client = ClientModel.from_examples(examples)
        np.testing.assert_allclose(client.a_matrix, np.diag([2.0, 2.0]), atol=1e-15)

    def test_population_validates_spectrum(self):
        client = scalar_client(4.0, 0.0)
        with pytest.raises(InvalidInputError, match="above ell"):
            Population.uniform([client], bounds=SpectrumBounds(mu=1.0, ell=2.0, c_radius=1.0))
        with pytest.raises(InvalidInputError, match="below mu"):
            Population.uniform([client], bounds=SpectrumBounds(mu=5.0, ell=6.0, c_radius=1.0))

    def test_population_validates_center_norm(self):
        client = scalar_client(1.0, 3.0)
        with pytest.raises(InvalidInputError, match="center norm"):
            Population.uniform([client], bounds=SpectrumBounds(mu=1.0, ell=2.0, c_radius=1.0))

    def test_population_validates_weights(self):
        clients = (scalar_client(1.0, 0.0), scalar_client(2.0, 0.0))
        bounds = SpectrumBounds(mu=1.0, ell=2.0, c_radius=0.0)
        with pytest.raises(InvalidInputError, match="sum"):
            Population(clients=clients, weights=np.array([0.7, 0.6]), bounds=bounds)
        with pytest.raises(InvalidInputError):
            Population(clients=clients, weights=np.array([1.5, -0.5]), bounds=bounds)

    def test_empty_population_rejected(self):
        with pytest.raises(InvalidInputError):
            Population(clients=(), weights=np.array([]), bounds=SpectrumBounds(1.0, 2.0))


class TestDistortionMatrix:
    def test_theta1_is_identity(self):
        client = scalar_client(4.0, 0.0)
        for alpha, gamma in [(0.0, 0.0), (0.5, 0.1), (3.0, 0.05)]:
            np.testing.assert_array_equal(
                distortion_matrix(client, alpha, gamma, WeightScheme.single()), np.eye(1)
            )

    @pytest.mark.parametrize("k", [1, 2, 3, 5, 10])
    def test_scalar_last_only_geometric(self, k):
        # A = 4, gamma = 1/8: (1 - gamma A)^(K-1) = (1/2)^(K-1)
        client = scalar_client(4.0, 0.0)
        q = distortion_matrix(client, 0.0, 0.125, WeightScheme.last_only(k))
        assert q[0, 0] == pytest.approx(0.5 ** (k - 1), abs=1e-15)

    def test_scalar_first_k_sum(self):
        # A = 2, gamma = 0.1: 1 + 0.8 + 0.64 = 2.44
        client = scalar_client(2.0, 0.0)
        q = distortion_matrix(client, 0.0, 0.1, WeightScheme.first_k(3))
        assert q[0, 0] == pytest.approx(2.44, abs=1e-15)

    def test_commutes_with_client_matrix(self):
        rng = keyed_rng(11, 0)
        for trial in range(20):
            pop = random_population(keyed_rng(11, trial), max_dim=8, max_clients=3)
            theta = random_theta(keyed_rng(12, trial), k_max=12)
            gamma = 0.9 / pop.bounds.ell
            for client in pop.clients:
                q = distortion_matrix(client, 0.0, gamma, theta)
                a = client.a_matrix
                assert np.linalg.norm(q @ a - a @ q, 2) <= 1e-10

    def test_eigenvalue_mapping(self):
        # each eigenvalue lam of A maps to sum_k theta_k (1-gamma(lam+alpha))^(k-1)
        # for Q, and that times lam for QA, matched as multisets
        for trial in range(20):
            rng = keyed_rng(13, trial)
            pop = random_population(rng, max_dim=8, max_clients=3)
            theta = random_theta(keyed_rng(14, trial), k_max=12)
            alpha = 0.5
            gamma = 0.9 / (pop.bounds.ell + alpha)
            for client in pop.clients:
                lams = eigh(client.a_matrix).eigenvalues
                q = distortion_matrix(client, alpha, gamma, theta)
                qa = 0.5 * (q @ client.a_matrix + client.a_matrix @ q)
                np.testing.assert_allclose(
                    np.sort(eigh(q).eigenvalues),
                    np.sort(scheme_q_eigenvalues(lams, alpha, gamma, theta)),
                    atol=1e-9,
                )
                np.testing.assert_allclose(
                    np.sort(eigh(qa).eigenvalues),
                    np.sort(scheme_qa_eigenvalues(lams, alpha, gamma, theta)),
                    atol=1e-9,
                )

    def test_positive_definite_under_contractive_gamma(self):
        for trial in range(20):
            rng = keyed_rng(15, trial)
            pop = random_population(rng, max_dim=8, max_clients=4)
            theta = random_theta(keyed_rng(16, trial), k_max=20)
            gamma = float(rng.uniform(0.0, 0.99)) / pop.bounds.ell
            for client in pop.clients:
                q = distortion_matrix(client, 0.0, gamma, theta)
                assert eigh(q).lambda_min > 0.0


class TestSurrogateHessian:
    def test_single_client_theta1(self):
        client = scalar_client(4.0, 0.0)
        pop = Population.uniform([client])
        np.testing.assert_allclose(
            surrogate_hessian(pop, 0.0, 0.1, WeightScheme.single()), [[4.0]], atol=1e-15
        )

    def test_gamma_zero_scales_mean(self):
        pop = scalar_pair_population()
        theta = WeightScheme.first_k(4)
        np.testing.assert_allclose(
            surrogate_hessian(pop, 0.0, 0.0, theta), [[4.0 * 2.5]], atol=1e-12
        )

    def test_scalar_pair_value(self):
        # clients A = (4, 1), gamma = 1/8, first two gradients: (6 + 1.875) / 2
        pop = scalar_pair_population()
        h = surrogate_hessian(pop, 0.0, 0.125, WeightScheme.first_k(2))
        assert h[0, 0] == pytest.approx(3.9375, abs=1e-15)

    def test_gamma_to_zero_converges_monotonically(self):
        pop = random_population(keyed_rng(17, 0), max_dim=6, max_clients=4, min_dim=2)
        theta = WeightScheme.first_k(5)
        target = theta.weight * sum(
            w * c.a_matrix for w, c in zip(pop.weights, pop.clients)
        )
        gaps = []
        for k in range(1, 9):
            h = surrogate_hessian(pop, 0.0, 10.0**-k, theta)
            gaps.append(np.linalg.norm(h - target, 2))
        assert all(g1 > g2 for g1, g2 in zip(gaps, gaps[1:]))
        assert gaps[-1] <= 1e-6 * np.linalg.norm(target, 2)


class TestSurrogateGradient:
    def test_zero_at_minimizer(self):
        pop = random_population(keyed_rng(18, 0), max_dim=6, max_clients=4)
        theta = random_theta(keyed_rng(18, 1), k_max=10)
        gamma = 0.5 / pop.bounds.ell
        x_star = surrogate_minimizer(pop, 0.0, gamma, theta)
        g = surrogate_gradient(pop, x_star, 0.0, gamma, theta)
        assert np.linalg.norm(g) <= 1e-10 * (1.0 + np.linalg.norm(x_star))

    def test_single_client_at_center(self):
        client = scalar_client(3.0, 0.7)
        pop = Population.uniform([client])
        g = surrogate_gradient(pop, np.array([0.7]), 0.0, 0.1, WeightScheme.single())
        np.testing.assert_allclose(g, [0.0], atol=1e-15)

    def test_scalar_pair_value(self):
        pop = scalar_pair_population()
        g = surrogate_gradient(pop, np.zeros(1), 0.0, 0.125, WeightScheme.first_k(2))
        assert g[0] == pytest.approx(-2.0625, abs=1e-15)


class TestMinimizers:
    def test_single_client_center(self):
        client = ClientModel(a_matrix=np.diag([2.0, 5.0]), center=np.array([0.3, -0.4]))
        pop = Population.uniform([client])
        np.testing.assert_allclose(
            surrogate_minimizer(pop, 0.5, 0.05, WeightScheme.first_k(6)), client.center, atol=1e-12
        )
        np.testing.assert_allclose(empirical_minimizer(pop), client.center, atol=1e-12)

    def test_gamma_zero_matches_empirical(self):
        pop = random_population(keyed_rng(19, 0), max_dim=6, max_clients=5)
        theta = WeightScheme.first_k(7)
        np.testing.assert_allclose(
            surrogate_minimizer(pop, 0.0, 0.0, theta), empirical_minimizer(pop), atol=1e-12
        )

    def test_scalar_pair_closed_form_and_grid_search(self):
        pop = scalar_pair_population()
        theta = WeightScheme.first_k(2)
        x_star = surrogate_minimizer(pop, 0.0, 0.125, theta)
        assert x_star[0] == pytest.approx(4.125 / 7.875, abs=1e-12)
        # grid-search oracle on [-1, 1] with step 1e-6
        grid = np.arange(-1.0, 1.0 + 1e-6, 1e-6)
        values = np.array(
            [
                0.5 * w * qa * (grid - c.center[0]) ** 2
                for w, qa, c in zip(
                    pop.weights,
                    [6.0, 1.875],  # Q_i A_i for the two scalar clients
                    pop.clients,
                )
            ]
        ).sum(axis=0)
        assert abs(grid[np.argmin(values)] - x_star[0]) <= 2e-6

    def test_symmetric_pair_empirical_zero(self):
        c = np.array([0.5, -0.5])
        a = np.diag([2.0, 3.0])
        pop = Population.uniform(
            [ClientModel(a_matrix=a, center=c), ClientModel(a_matrix=a, center=-c)]
        )
        np.testing.assert_allclose(empirical_minimizer(pop), np.zeros(2), atol=1e-14)

    def test_scalar_pair_empirical(self):
        assert empirical_minimizer(scalar_pair_population())[0] == pytest.approx(0.6, abs=1e-15)

    def test_empirical_residual(self):
        # E[A_i (x - c_i)] vanishes at the empirical minimizer
        for trial in range(10):
            pop = random_population(keyed_rng(22, trial), max_dim=10, max_clients=6)
            x_star = empirical_minimizer(pop)
            residual = sum(
                w * (c.a_matrix @ (x_star - c.center))
                for w, c in zip(pop.weights, pop.clients)
            )
            assert np.linalg.norm(residual) <= 1e-10

    def test_conditioning_error(self):
        pop = scalar_pair_population()
        with pytest.raises(ConditioningError):
            surrogate_minimizer(pop, 0.0, 0.25, WeightScheme.first_k(2))


class TestMinimizerDistance:
    def test_gamma_zero(self):
        pop = scalar_pair_population()
        assert minimizer_distance(pop, 0.0, 0.0, WeightScheme.first_k(3)) <= 1e-12

    def test_theta1_any_gamma(self):
        pop = scalar_pair_population()
        assert minimizer_distance(pop, 0.0, 0.2, WeightScheme.single()) <= 1e-12

    def test_scalar_pair_value(self):
        pop = scalar_pair_population()
        d = minimizer_distance(pop, 0.0, 0.125, WeightScheme.first_k(2))
        assert d == pytest.approx(abs(4.125 / 7.875 - 0.6), abs=1e-12)


class TestLossValues:
    def test_minimality_probe(self):
        pop = random_population(keyed_rng(20, 0), max_dim=5, max_clients=4)
        x_star = empirical_minimizer(pop)
        base = loss_value(pop, x_star)
        rng = keyed_rng(20, 1)
        for _ in range(100):
            assert base <= loss_value(pop, x_star + 0.5 * rng.standard_normal(pop.dim)) + 1e-15

    def test_single_client_zero_at_center(self):
        client = scalar_client(2.0, 0.9)
        pop = Population.uniform([client])
        assert loss_value(pop, client.center) == 0.0

    def test_scalar_value(self):
        client = scalar_client(2.0, 0.0)
        pop = Population.uniform([client])
        assert loss_value(pop, np.array([3.0])) == pytest.approx(9.0, abs=1e-15)

    def test_surrogate_loss_consistent_with_gradient(self):
        pop = scalar_pair_population()
        theta = WeightScheme.first_k(2)
        # f~(x) = 0.5 * E[Q A] (x - x*)^2 + const; check against hand values
        value = surrogate_loss_value(pop, np.zeros(1), 0.0, 0.125, theta)
        expected = 0.5 * (0.5 * 6.0 * 1.0 + 0.5 * 1.875 * 1.0)
        assert value == pytest.approx(expected, abs=1e-14)


class TestSerialization:
    def test_round_trip_bit_exact(self):
        pop = random_population(keyed_rng(21, 0), max_dim=5, max_clients=4, min_dim=2)
        text = dumps_population(pop)
        back = loads_population(text)
        assert back.dim == pop.dim
        assert back.n_clients == pop.n_clients
        np.testing.assert_array_equal(back.weights, pop.weights)
        assert back.bounds == pop.bounds
        for c1, c2 in zip(pop.clients, back.clients):
            np.testing.assert_array_equal(c1.a_matrix, c2.a_matrix)
            np.testing.assert_array_equal(c1.center, c2.center)
        assert dumps_population(back) == text

    def test_parse_error_names_line(self):
        pop = scalar_pair_population()
        lines = dumps_population(pop).splitlines()
        lines[4] = "client weigth 0.5"  # typo on line 5
        with pytest.raises(PopulationFormatError) as err:
            loads_population("\n".join(lines))
        assert "line 5" in str(err.value)
        assert err.value.line_number == 5

    def test_bad_number_reported(self):
        text = "lul-population v1\ndim 1\nbounds mu 1 ell 2 c_radius 0\nclients 1\nclient weight 1\na nope\nc 0\n"
        with pytest.raises(PopulationFormatError) as err:
            loads_population(text)
        assert err.value.line_number == 6

    def test_comments_and_blank_lines(self):
        pop = scalar_pair_population()
        text = "# header comment\n\n" + dumps_population(pop).replace(
            "clients 2", "clients 2  # two scalar clients"
        )
        back = loads_population(text)
        assert back.n_clients == 2

    def test_truncated_file(self):
        text = "lul-population v1\ndim 2\n"
        with pytest.raises(PopulationFormatError):
            loads_population(text)


@given(
    lam=st.floats(min_value=0.1, max_value=10.0),
    gamma_frac=st.floats(min_value=0.0, max_value=0.99),
    k=st.integers(min_value=1, max_value=40),
)
@settings(max_examples=120, deadline=None)
def test_distortion_matches_eigen_map_scalar(lam, gamma_frac, k):
    """1x1 distortion equals the scalar eigenvalue map for every scheme shape."""
    client = scalar_client(lam, 0.0)
    gamma = gamma_frac / lam
    for theta in (WeightScheme.first_k(k), WeightScheme.last_only(k)):
        q = distortion_matrix(client, 0.0, gamma, theta)[0, 0]
        mapped = scheme_q_eigenvalues(np.array([lam]), 0.0, gamma, theta)[0]
        assert q == pytest.approx(mapped, rel=1e-11, abs=1e-13)
