import random

import pytest

from captl.model import (
    ModelSemanticsError,
    ModelSyntaxError,
    build_mdp,
    cardinality,
    parse_model,
    post,
    reach,
    serialize_model,
)

from helpers import random_mdp


def two_state_doc():
    return """
    {
      "states": 2, "init": 0, "props": ["goal"],
      "labels": {"1": ["goal"]},
      "transitions": [
        {"from": 0, "action": "a", "branches": [{"to": 1, "prob": 1.0}]},
        {"from": 1, "action": "a", "branches": [{"to": 1, "prob": 1.0}]}
      ]
    }
    """


def test_parse_two_state_round_trip():
    mdp = parse_model(two_state_doc())
    assert mdp.num_states == 2
    assert len(mdp.choices) == 2
    assert mdp.labeling[1] == frozenset({"goal"})
    again = parse_model(serialize_model(mdp))
    assert again == mdp


def test_distribution_sum_error():
    doc = """
    {"states": 2, "init": 0, "props": [], "labels": {},
     "transitions": [{"from": 0, "action": "a",
                      "branches": [{"to": 0, "prob": 0.6}, {"to": 1, "prob": 0.3}]}]}
    """
    with pytest.raises(ModelSemanticsError) as err:
        parse_model(doc)
    assert "0.9" in str(err.value)
    assert "∉ {0,1}" in str(err.value)


def test_json_syntax_error_reports_position():
    with pytest.raises(ModelSyntaxError) as err:
        parse_model('{"states": 2,,}')
    assert err.value.line == 1
    assert err.value.column is not None


def test_robot_fragment_branches(robot3):
    mdp, _ = robot3
    names = {name: s for s, name in enumerate(mdp.state_names)}
    s = names["g0_h10_x1_y1"]
    succ = post(mdp, s, "N")
    assert set(succ) == {names["g0_h9_x1_y2"], names["g0_h8_x1_y1"]}
    ch = mdp.choice(s, "N")
    by_dest = dict(zip(ch.dests, ch.probs))
    assert by_dest[names["g0_h9_x1_y2"]] == pytest.approx(0.9)
    assert by_dest[names["g0_h8_x1_y1"]] == pytest.approx(0.1)


def test_duplicate_state_action_pair_rejected():
    doc = """
    {"states": 2, "init": 0, "props": [], "labels": {},
     "transitions": [
        {"from": 0, "action": "a", "branches": [{"to": 1, "prob": 1.0}]},
        {"from": 0, "action": "a", "branches": [{"to": 0, "prob": 1.0}]}]}
    """
    with pytest.raises(ModelSemanticsError, match="duplicate transition entry"):
        parse_model(doc)


def test_undeclared_label_rejected():
    doc = """
    {"states": 1, "init": 0, "props": [], "labels": {"0": ["goal"]}, "transitions": []}
    """
    with pytest.raises(ModelSemanticsError, match="undeclared proposition"):
        parse_model(doc)


def test_bad_probability_rejected():
    doc = """
    {"states": 1, "init": 0, "props": [], "labels": {},
     "transitions": [{"from": 0, "action": "a", "branches": [{"to": 0, "prob": 1.5}]}]}
    """
    with pytest.raises(ModelSemanticsError, match="outside"):
        parse_model(doc)


def test_unknown_state_reference_rejected():
    doc = """
    {"states": 1, "init": 0, "props": [], "labels": {},
     "transitions": [{"from": 0, "action": "a", "branches": [{"to": 7, "prob": 1.0}]}]}
    """
    with pytest.raises(ModelSemanticsError, match="unknown state"):
        parse_model(doc)


def test_deadlock_is_warning_not_error():
    mdp = build_mdp(num_states=2, transitions=[(0, "a", [(1, 1.0)])])
    assert mdp.is_deadlock(1)
    assert any("deadlock" in w for w in mdp.validation_warnings)


# -- reach / post / cardinality ----------------------------------------------


def test_reach_absorbing_and_chain():
    mdp = build_mdp(
        num_states=3,
        transitions=[(0, "a", [(1, 1.0)]), (1, "a", [(2, 1.0)]), (2, "a", [(2, 1.0)])],
    )
    assert reach(mdp, 2) == (2,)
    assert reach(mdp, 0) == (0, 1, 2)


def _closure_oracle(mdp, s):
    """Naive transitive closure over the edge relation."""
    edges = {(ch.state, t) for ch in mdp.choices for t in ch.dests}
    closed = {s}
    changed = True
    while changed:
        changed = False
        for (u, v) in edges:
            if u in closed and v not in closed:
                closed.add(v)
                changed = True
    return tuple(sorted(closed))


def test_reach_matches_closure_oracle():
    rng = random.Random(7)
    for _ in range(10):
        mdp = random_mdp(rng, num_states=20, max_actions=2)
        for s in (0, 5, 11):
            assert reach(mdp, s) == _closure_oracle(mdp, s)


def test_reach_is_fixed_point_and_reflexive():
    rng = random.Random(8)
    mdp = random_mdp(rng, num_states=15)
    for s in range(mdp.num_states):
        r = set(reach(mdp, s))
        assert s in r
        for u in r:
            for name in mdp.actions:
                assert set(post(mdp, u, name)) <= r


def test_post_examples():
    mdp = build_mdp(
        num_states=3,
        transitions=[(0, "a", [(1, 0.9), (2, 0.1)]), (1, "a", [(1, 1.0)]), (2, "a", [(2, 1.0)])],
    )
    assert post(mdp, 0, "a") == (1, 2)
    assert post(mdp, 0, "nothere") == ()


def test_cardinality():
    mdp = parse_model(two_state_doc())
    assert cardinality(mdp) == (2, 2, 2)
    empty = build_mdp(num_states=4, transitions=[])
    assert cardinality(empty) == (4, 0, 0)


def test_cardinality_matches_recount(robot3):
    mdp, _ = robot3
    n, nnz, choices = cardinality(mdp)
    assert n == mdp.num_states
    assert choices == len(mdp.choices) == sum(len(mdp.choices_of(s)) for s in range(n))
    assert nnz == sum(len(ch.dests) for ch in mdp.choices)
    assert nnz >= choices >= 0


def test_round_trip_random_models():
    rng = random.Random(9)
    for _ in range(20):
        mdp = random_mdp(rng, num_states=rng.randint(3, 12), max_actions=3)
        text = serialize_model(mdp)
        again = parse_model(text)
        assert serialize_model(again) == text
        assert parse_model(serialize_model(again)) == again
