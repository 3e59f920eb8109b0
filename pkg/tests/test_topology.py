import itertools

import pytest

from corps.topology import (
    TopologyError, flow_reachable, load_preset, parse_topology,
    relation_holds,
)

AGENTS3 = ("A", "B", "C")


def paths_up_to(n, agents=AGENTS3):
    out = [()]
    for k in range(1, n + 1):
        out.extend(itertools.product(agents, repeat=k))
    return out


def doxastic_down_oracle(a, b):
    # candown(g1, g2) iff g1 = g.A and g2 = g.A.A, by direct definition
    return len(a) >= 1 and b == a + (a[-1],)


class TestPresets:
    def test_doxastic_candown_example(self):
        t = load_preset("doxastic")
        assert relation_holds(t, "candown", ("A",), ("A", "A"))

    def test_doxastic_root_has_no_down(self):
        t = load_preset("doxastic")
        assert not relation_holds(t, "candown", (), ("A",))

    def test_cansend_constant_true(self):
        t = parse_topology("cansend: true")
        for a, b in itertools.product(paths_up_to(2), repeat=2):
            assert relation_holds(t, "cansend", a, b)

    def test_doxastic_canup_deep(self):
        t = load_preset("doxastic")
        assert relation_holds(t, "canup", ("B", "A"), ("B", "A", "A"))

    def test_choreo_cansend(self):
        t = load_preset("choreo")
        assert relation_holds(t, "cansend", ("A",), ("B",))

    def test_doxastic_cansend_absent(self):
        t = load_preset("doxastic")
        assert not relation_holds(t, "cansend", ("A",), ("B",))

    def test_siblings_cansend(self):
        t = load_preset("siblings")
        assert relation_holds(t, "cansend", ("C", "A"), ("C", "B"))
        assert not relation_holds(t, "cansend", ("C", "A"), ("D", "B"))
        assert not relation_holds(t, "cansend", ("A",), ("C", "B"))

    def test_unknown_preset(self):
        with pytest.raises(TopologyError):
            load_preset("nosuch")

    def test_doxastic_characterization_exhaustive(self):
        # Enumerate all path pairs up to length 3 over three agents and
        # compare the pattern matcher against the direct definition.
        t = load_preset("doxastic")
        for a in paths_up_to(3):
            for b in paths_up_to(3):
                expected = doxastic_down_oracle(a, b)
                assert relation_holds(t, "candown", a, b) == expected, (a, b)
                assert relation_holds(t, "canup", a, b) == expected, (a, b)


class TestParsing:
    def test_literal_rule(self):
        t = parse_topology("cansend: A => B")
        assert relation_holds(t, "cansend", ("A",), ("B",))
        assert not relation_holds(t, "cansend", ("B",), ("A",))

    def test_doxastic_rule_text(self):
        t = parse_topology("candown: *.$a => *.$a.$a")
        assert relation_holds(t, "candown", ("A",), ("A", "A"))
        assert not relation_holds(t, "candown", ("A",), ("A", "B"))

    def test_constant_rule(self):
        t = parse_topology("cansend: true")
        assert relation_holds(t, "cansend", (), ("A", "B"))

    def test_comments_and_blank_lines(self):
        t = parse_topology("# policy\n\ncansend: A => B  # trailing\n")
        assert relation_holds(t, "cansend", ("A",), ("B",))

    def test_star_not_at_head_rejected(self):
        with pytest.raises(TopologyError) as exc:
            parse_topology("cansend: A.* => B")
        assert exc.value.line == 1

    def test_unknown_kind_rejected(self):
        with pytest.raises(TopologyError) as exc:
            parse_topology("candown: A => B\ncanfly: A => B")
        assert exc.value.line == 2

    def test_star_binds_same_prefix_both_sides(self):
        t = parse_topology("cansend: *.$a => *.$b")
        assert relation_holds(t, "cansend", ("X", "A"), ("X", "B"))
        assert not relation_holds(t, "cansend", ("X", "A"), ("Y", "B"))

    def test_agent_var_consistency(self):
        t = parse_topology("cansend: $a.$a => $a")
        assert relation_holds(t, "cansend", ("A", "A"), ("A",))
        assert not relation_holds(t, "cansend", ("A", "B"), ("A",))

    def test_false_rule_matches_nothing(self):
        t = parse_topology("cansend: false")
        assert not relation_holds(t, "cansend", ("A",), ("B",))

    def test_determinism(self):
        t = load_preset("siblings")
        pairs = list(itertools.product(paths_up_to(2), repeat=2))
        first = [relation_holds(t, "cansend", a, b) for a, b in pairs]
        second = [relation_holds(t, "cansend", a, b) for a, b in pairs]
        assert first == second


def closure_oracle(topology, universe):
    """Floyd-Warshall closure over explicitly materialized edges."""
    nodes = sorted(universe)
    index = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    reach = [[i == j for j in range(n)] for i in range(n)]
    for a in nodes:
        for b in nodes:
            if relation_holds(topology, "cansend", a, b):
                reach[index[a]][index[b]] = True
            if b[:len(a)] == a:
                if relation_holds(topology, "canup", a, b):
                    reach[index[a]][index[b]] = True
                if relation_holds(topology, "candown", a, b):
                    reach[index[b]][index[a]] = True
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if reach[i][k] and reach[k][j]:
                    reach[i][j] = True
    return {(a, b) for a in nodes for b in nodes if reach[index[a]][index[b]]}


class TestFlowReachable:
    def test_choreo_direct_send(self):
        t = load_preset("choreo")
        assert flow_reachable(t, ("A",), ("B",), {(), ("A",), ("B",)})

    def test_doxastic_sealed(self):
        t = load_preset("doxastic")
        assert not flow_reachable(t, ("A",), ("B",), {(), ("A",), ("B",)})

    def test_reflexive(self):
        t = parse_topology("cansend: false")
        assert flow_reachable(t, ("A",), ("A",), {("A",)})

    def test_doxastic_vertical_chain(self):
        t = load_preset("doxastic")
        universe = {(), ("A",), ("A", "A"), ("A", "A", "A")}
        assert flow_reachable(t, ("A",), ("A", "A", "A"), universe)
        assert flow_reachable(t, ("A", "A", "A"), ("A",), universe)
        assert not flow_reachable(t, ("A",), (), universe)

    def test_matches_closure_oracle(self):
        universe = set(paths_up_to(2, ("A", "B")))
        for preset in ("doxastic", "choreo", "siblings"):
            t = load_preset(preset)
            expected = closure_oracle(t, universe)
            for a in universe:
                for b in universe:
                    assert flow_reachable(t, a, b, universe) == ((a, b) in expected), \
                        (preset, a, b)

    def test_monotone_in_rules(self):
        base = parse_topology("candown: *.$a => *.$a.$a\ncanup: *.$a => *.$a.$a")
        extended = parse_topology(
            "candown: *.$a => *.$a.$a\ncanup: *.$a => *.$a.$a\ncansend: A => B")
        universe = set(paths_up_to(2, ("A", "B")))
        for a in universe:
            for b in universe:
                if flow_reachable(base, a, b, universe):
                    assert flow_reachable(extended, a, b, universe)
