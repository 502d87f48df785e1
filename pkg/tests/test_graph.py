import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defuse.errors import CycleDetected, NodeOutOfRange, NonSquareInput, ParseError
from defuse.graph import (
    Dag,
    ancestor_closure,
    default_names,
    from_json_dict,
    read_adjacency_csv,
    read_json,
    to_dot,
    to_json_dict,
    topological_depths,
    validate_acyclic,
    write_json,
)
from oracles import brute_force_ancestors, brute_force_depths, random_dag_edges

# Four-node benchmark graph: 1->2, 3->2, 1->4, 2->4 in 1-based labels.
DIAMOND = frozenset({(0, 1), (2, 1), (0, 3), (1, 3)})


def adjacency_of(p, edges):
    u = np.zeros((p, p), dtype=int)
    for k, j in edges:
        u[k, j] = 1
    return u


class TestValidateAcyclic:
    def test_diamond_is_valid(self):
        dag = validate_acyclic(adjacency_of(4, DIAMOND))
        assert dag.p == 4
        assert dag.edges == DIAMOND

    def test_edgeless_all_roots(self):
        dag = validate_acyclic(np.zeros((3, 3), dtype=int))
        assert dag.edges == frozenset()
        assert all(dag.parents(j) == frozenset() for j in range(3))

    def test_two_cycle_rejected(self):
        with pytest.raises(CycleDetected) as err:
            validate_acyclic(adjacency_of(2, {(0, 1), (1, 0)}))
        assert len(err.value.cycle) >= 2

    def test_self_loop_rejected(self):
        u = np.zeros((3, 3), dtype=int)
        u[1, 1] = 1
        with pytest.raises(CycleDetected):
            validate_acyclic(u)

    def test_long_cycle_named(self):
        edges = {(0, 1), (1, 2), (2, 3), (3, 0)}
        with pytest.raises(CycleDetected) as err:
            validate_acyclic(adjacency_of(4, edges))
        cycle = err.value.cycle
        assert cycle[0] == cycle[-1]
        assert len(set(cycle[:-1])) == 4

    def test_non_square_rejected(self):
        with pytest.raises(NonSquareInput):
            validate_acyclic(np.zeros((2, 3)))

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError):
            validate_acyclic(np.full((2, 2), 0.5))

    def test_edges_match_adjacency(self):
        dag = validate_acyclic(adjacency_of(4, DIAMOND))
        assert np.array_equal(dag.adjacency(), adjacency_of(4, DIAMOND))

    def test_edge_out_of_range(self):
        with pytest.raises(NodeOutOfRange):
            Dag(2, frozenset({(0, 5)}))


class TestTopologicalDepths:
    def test_diamond_profile(self):
        prof = topological_depths(Dag(4, DIAMOND))
        assert prof.depths == (0, 1, 0, 2)
        assert prof.d_max == 2
        assert prof.layer(0) == frozenset()
        assert prof.layer(1) == frozenset({0, 2})
        assert prof.layer(2) == frozenset({0, 1, 2})
        assert prof.layer(3) == frozenset({0, 1, 2, 3})

    def test_edgeless(self):
        prof = topological_depths(Dag(5))
        assert prof.depths == (0,) * 5
        assert prof.d_max == 0

    def test_chain(self):
        edges = frozenset({(0, 1), (1, 2), (2, 3)})
        prof = topological_depths(Dag(4, edges))
        assert prof.depths == brute_force_depths(4, edges) == (0, 1, 2, 3)

    def test_depth_via_longer_path_wins(self):
        # 0 -> 3 directly but also 0 -> 1 -> 2 -> 3.
        edges = frozenset({(0, 3), (0, 1), (1, 2), (2, 3)})
        assert topological_depths(Dag(4, edges)).depths == (0, 1, 2, 3)

    @pytest.mark.parametrize("seed", range(40))
    def test_matches_brute_force_on_random_dags(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(2, 9))
        edges = random_dag_edges(p, 0.4, rng)
        dag = Dag(p, edges)
        assert topological_depths(dag).depths == brute_force_depths(p, edges)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_layer_and_edge_invariants(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(2, 9))
        dag = Dag(p, random_dag_edges(p, 0.35, rng))
        prof = topological_depths(dag)
        assert prof.layer(0) == frozenset()
        assert prof.layer(prof.d_max + 1) == frozenset(range(p))
        for d in range(prof.d_max + 1):
            assert prof.layer(d) <= prof.layer(d + 1)
            assert prof.layer(d) == frozenset(j for j in range(p) if prof.depths[j] < d)
        for k, j in dag.edges:
            assert prof.depths[k] < prof.depths[j]
        for j in range(p):
            assert prof.depths[j] == 0 or dag.parents(j)
            assert (prof.depths[j] == 0) == (not dag.parents(j))


class TestAncestorClosure:
    def test_diamond_sink(self):
        assert ancestor_closure(Dag(4, DIAMOND), 3) == frozenset({0, 1, 2})

    def test_root_has_none(self):
        assert ancestor_closure(Dag(4, DIAMOND), 0) == frozenset()

    def test_chain(self):
        dag = Dag(3, frozenset({(0, 1), (1, 2)}))
        assert ancestor_closure(dag, 2) == frozenset({0, 1})

    def test_out_of_range(self):
        with pytest.raises(NodeOutOfRange):
            ancestor_closure(Dag(3), 3)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_matches_brute_force_and_layer_containment(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(2, 8))
        edges = random_dag_edges(p, 0.4, rng)
        dag = Dag(p, edges)
        prof = topological_depths(dag)
        for j in range(p):
            anc = ancestor_closure(dag, j)
            assert anc == brute_force_ancestors(p, edges, j)
            assert anc <= prof.layer(prof.depths[j])


class TestInterchange:
    def test_json_roundtrip_is_one_based(self):
        dag = Dag(4, DIAMOND)
        doc = to_json_dict(dag)
        assert doc["p"] == 4
        assert [1, 2] in doc["edges"] and [2, 4] in doc["edges"]
        back, names = from_json_dict(doc)
        assert back == dag
        assert names == default_names(4)

    def test_json_file_roundtrip(self, tmp_path):
        dag = Dag(3, frozenset({(0, 2)}))
        path = tmp_path / "g.json"
        write_json(dag, path, names=("a", "b", "c"), provenance={"seed": 7})
        back, names = read_json(path)
        assert back == dag and names == ("a", "b", "c")
        assert json.loads(path.read_text())["edges"] == [[1, 3]]

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            read_json(path)

    def test_dot_has_one_line_per_edge(self):
        dot = to_dot(Dag(3, frozenset({(0, 2)})), names=("a", "b", "c"))
        assert dot.splitlines()[0] == "digraph {"
        assert '  "a" -> "c";' in dot.splitlines()
        assert sum("->" in line for line in dot.splitlines()) == 1

    def test_adjacency_csv(self, tmp_path):
        path = tmp_path / "adj.csv"
        path.write_text("a,b,c\n0,0,1\n0,0,0\n0,0,0\n")
        dag, names = read_adjacency_csv(path)
        assert dag.edges == frozenset({(0, 2)})
        assert names == ("a", "b", "c")

    def test_adjacency_csv_bad_row(self, tmp_path):
        path = tmp_path / "adj.csv"
        path.write_text("a,b\n0,1\n0\n")
        with pytest.raises(ParseError, match="line 3"):
            read_adjacency_csv(path)
