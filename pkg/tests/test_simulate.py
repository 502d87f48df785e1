import numpy as np
import pytest

from defuse.errors import (
    InvalidProbability,
    InvalidSize,
    ParseError,
    ShapeMismatch,
    ZeroVarianceColumn,
)
from defuse.graph import Dag, topological_depths
from defuse.simulate import (
    Dataset,
    SemSpec,
    draw_sem_spec,
    error_covariance,
    hub_dag,
    random_dag,
    read_csv,
    sample,
    sample_confounded_trio,
    standardize,
    trio_truth,
    write_csv,
)


class TestRandomDag:
    def test_zero_probability_is_edgeless(self):
        assert random_dag(10, 0.0, 1).edges == frozenset()

    def test_one_probability_is_complete_upper_triangular(self):
        dag = random_dag(10, 1.0, 1)
        assert len(dag.edges) == 45
        assert all(k < j for k, j in dag.edges)

    def test_invalid_probability(self):
        with pytest.raises(InvalidProbability):
            random_dag(5, 1.5, 0)

    def test_monte_carlo_edge_count(self):
        # Binomial mean s * p(p-1)/2 = 14.5 for p = 30, s = 1/30.
        counts = [len(random_dag(30, 1 / 30, seed).edges) for seed in range(1000)]
        assert abs(np.mean(counts) - 14.5) < 1.0

    def test_deterministic(self):
        assert random_dag(20, 0.2, 77).edges == random_dag(20, 0.2, 77).edges

    def test_always_acyclic(self):
        for seed in range(25):
            dag = random_dag(12, 0.5, seed)
            topological_depths(dag)  # would raise on a cycle at construction


class TestHubDag:
    def test_four_nodes(self):
        assert hub_dag(4).edges == frozenset({(0, 1), (0, 2), (0, 3)})

    def test_two_nodes(self):
        assert hub_dag(2).edges == frozenset({(0, 1)})

    def test_large_hub_depths(self):
        dag = hub_dag(100)
        assert len(dag.edges) == 99
        prof = topological_depths(dag)
        assert prof.depths[0] == 0
        assert all(d == 1 for d in prof.depths[1:])

    def test_too_small(self):
        with pytest.raises(InvalidSize):
            hub_dag(1)


class TestSemSpec:
    def test_error_covariance_p2(self):
        assert np.array_equal(error_covariance(2), np.array([[2.0, 1.0], [1.0, 2.0]]))

    def test_error_covariance_p3(self):
        expected = np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 2.0]])
        assert np.array_equal(error_covariance(3), expected)

    def test_draw_ranges(self):
        dag = random_dag(12, 0.4, 3)
        spec = draw_sem_spec(dag, 11)
        for edge in dag.edges:
            assert 2.0 <= abs(spec.alphas[edge]) <= 3.0
            assert -1.0 <= spec.shifts[edge] <= 1.0
            assert spec.func_tags[edge] in ("square", "cosine")

    def test_single_parent_has_no_interaction(self):
        dag = Dag(3, frozenset({(0, 2)}))
        spec = draw_sem_spec(dag, 0)
        assert spec.interactions[2] is None

    def test_multi_parent_interaction_pair(self):
        dag = Dag(4, frozenset({(0, 3), (1, 3), (2, 3)}))
        spec = draw_sem_spec(dag, 5)
        k1, k2 = spec.interactions[3]
        assert k1 != k2
        assert {k1, k2} <= {0, 1, 2}

    def test_deterministic(self):
        dag = random_dag(8, 0.3, 2)
        a, b = draw_sem_spec(dag, 9), draw_sem_spec(dag, 9)
        assert a.alphas == b.alphas and a.func_tags == b.func_tags and a.shifts == b.shifts

    def test_json_dict(self):
        dag = Dag(3, frozenset({(0, 2), (1, 2)}))
        doc = draw_sem_spec(dag, 1).to_json_dict()
        assert doc["p"] == 3
        assert {e["from"] for e in doc["edges"]} == {1, 2}
        assert doc["sigma"][0][0] == 2.0


class TestSample:
    def test_root_columns_equal_errors_exactly(self):
        dag = Dag(3, frozenset({(0, 2)}))
        spec = draw_sem_spec(dag, 4)
        errors = np.random.default_rng(0).standard_normal((50, 3))
        data = sample(spec, 50, 0, errors=errors)
        assert np.array_equal(data.column(0), errors[:, 0])
        assert np.array_equal(data.column(1), errors[:, 1])

    def test_root_variance_near_two(self):
        dag = Dag(3, frozenset({(0, 2)}))
        data = sample(draw_sem_spec(dag, 4), 5000, 21)
        assert abs(np.var(data.column(1)) - 2.0) < 0.2

    def test_noise_free_structural_consistency(self):
        dag = random_dag(8, 0.4, 6)
        spec = draw_sem_spec(dag, 7)
        n = 20
        data = sample(spec, n, 0, errors=np.zeros((n, 8)))
        funcs = {"square": np.square, "cosine": np.cos}
        for j in range(8):
            expected = np.zeros(n)
            for k in sorted(dag.parents(j)):
                f = funcs[spec.func_tags[(k, j)]]
                expected += spec.alphas[(k, j)] * f(data.column(k) + spec.shifts[(k, j)])
            pair = spec.interactions[j]
            if pair is not None:
                expected += data.column(pair[0]) * data.column(pair[1])
            assert np.array_equal(data.column(j), expected)

    def test_fixed_cosine_chain_hand_evaluation(self):
        dag = Dag(3, frozenset({(0, 1), (1, 2)}))
        spec = SemSpec(
            dag=dag,
            func_tags={(0, 1): "cosine", (1, 2): "cosine"},
            alphas={(0, 1): 2.5, (1, 2): -2.0},
            shifts={(0, 1): 0.3, (1, 2): -0.8},
            interactions={0: None, 1: None, 2: None},
            sigma=error_covariance(3),
        )
        data = sample(spec, 5, 0, errors=np.zeros((5, 3)))
        y1 = np.zeros(5)
        y2 = 2.5 * np.cos(y1 + 0.3)
        y3 = -2.0 * np.cos(y2 - 0.8)
        assert np.allclose(data.values, np.column_stack([y1, y2, y3]), atol=0, rtol=0)

    def test_error_correlation_matches_covariance(self):
        dag = Dag(4)  # edgeless: columns are raw errors
        data = sample(draw_sem_spec(dag, 0), 10000, 3)
        emp = np.corrcoef(data.values.T)
        assert abs(emp[0, 1] - 0.5) < 0.05
        assert abs(emp[0, 2]) < 0.05
        cov = np.cov(data.values.T)
        assert np.max(np.abs(cov - error_covariance(4))) < 0.1

    def test_bitwise_determinism(self):
        dag = random_dag(6, 0.3, 1)
        spec = draw_sem_spec(dag, 2)
        assert np.array_equal(sample(spec, 100, 5).values, sample(spec, 100, 5).values)

    def test_topological_evaluation_order(self):
        # Node order scrambled: 2 -> 0 -> 1 must still evaluate parents first.
        dag = Dag(3, frozenset({(2, 0), (0, 1)}))
        spec = draw_sem_spec(dag, 8)
        n = 10
        data = sample(spec, n, 0, errors=np.zeros((n, 3)))
        funcs = {"square": np.square, "cosine": np.cos}
        f20 = funcs[spec.func_tags[(2, 0)]]
        assert np.array_equal(data.column(0), spec.alphas[(2, 0)] * f20(data.column(2) + spec.shifts[(2, 0)]))


class TestConfoundedTrio:
    def test_truth_graph_and_depths(self):
        truth = trio_truth()
        assert truth.edges == frozenset({(0, 2)})
        assert topological_depths(truth).depths == (0, 0, 1)

    def test_population_moments(self):
        data = sample_confounded_trio(200000, 13)
        y = data.values
        assert abs(np.var(y[:, 0]) - 2.0) < 0.05
        assert abs(np.cov(y[:, 0], y[:, 1])[0, 1] - 1.0) < 0.05

    def test_population_regression_surface(self):
        # E(Y3 | Y1, Y2) = cos(Y1) + Y1/3 + Y2/3: regress the cosine-free
        # remainder on (Y1, Y2) and read the deconfounding slopes.
        data = sample_confounded_trio(200000, 29)
        y = data.values
        target = y[:, 2] - np.cos(y[:, 0])
        design = np.column_stack([np.ones(len(y)), y[:, 0], y[:, 1]])
        coefs, *_ = np.linalg.lstsq(design, target, rcond=None)
        assert abs(coefs[1] - 1 / 3) < 0.02
        assert abs(coefs[2] - 1 / 3) < 0.02

    def test_deterministic(self):
        assert np.array_equal(
            sample_confounded_trio(50, 4).values, sample_confounded_trio(50, 4).values
        )


class TestStandardize:
    def test_three_point_column(self):
        data = Dataset(values=np.array([[1.0], [2.0], [3.0]]), names=("a",))
        out = standardize(data)
        assert np.allclose(out.values[:, 0], [-1.0, 0.0, 1.0])
        assert out.standardized

    def test_mean_zero_unit_variance(self):
        data = Dataset(values=np.random.default_rng(0).normal(5, 3, (200, 4)), names=None)
        out = standardize(data)
        assert np.max(np.abs(out.values.mean(axis=0))) < 1e-12
        assert np.max(np.abs(out.values.std(axis=0, ddof=1) - 1)) < 1e-12

    def test_idempotent(self):
        data = Dataset(values=np.random.default_rng(1).normal(2, 7, (100, 3)), names=None)
        once = standardize(data)
        twice = standardize(once)
        assert np.max(np.abs(once.values - twice.values)) < 1e-8

    def test_zero_variance_column(self):
        data = Dataset(values=np.column_stack([np.ones(10), np.arange(10.0)]), names=("c", "x"))
        with pytest.raises(ZeroVarianceColumn, match="c"):
            standardize(data)


class TestDatasetIO:
    def test_roundtrip_exact(self, tmp_path):
        data = sample_confounded_trio(40, 9)
        path = tmp_path / "d.csv"
        write_csv(data, path, provenance="seed=9")
        back = read_csv(path)
        assert back.names == data.names
        assert np.array_equal(back.values, data.values)

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1.0,2.0\n1.0,oops\n")
        with pytest.raises(ParseError, match="line 3"):
            read_csv(path)

    def test_wrong_cell_count(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1.0\n")
        with pytest.raises(ParseError, match="line 2"):
            read_csv(path)

    def test_validation(self):
        with pytest.raises(ShapeMismatch):
            Dataset(values=np.zeros((1, 3)), names=None)
        with pytest.raises(ValueError):
            Dataset(values=np.array([[1.0, np.nan], [0.0, 1.0]]), names=None)
