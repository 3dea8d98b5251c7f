from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from transonline.adversaries import (
    BalancedRatioAdversary,
    BalancedRatioParams,
    LittlestoneTreeAdversary,
    ScriptedAdversary,
    construct_sequence,
    format_scripted,
    is_ancestry_closed,
    majority,
    parse_scripted,
    scripted_adversary,
    shrinkage_holds,
)
from transonline.engine import play_standard, play_transductive
from transonline.hypotheses import SparseClass, class_over_points, domain_nodes, full_class
from transonline.learners import ConstantLearner, HalvingLearner, RandomLearner, SOALearner, make_baseline
from transonline.treebits import ROOT, NodeId

N = NodeId.parse
QUARTER = BalancedRatioParams(Fraction(1, 4), 1)


def one_point_class(ones: int, size: int):
    d, pts = domain_nodes(1)
    return class_over_points(d, pts, [[1]] * ones + [[0]] * (size - ones)), pts


# --------------------------------------------------------------------------- parameters


def test_params_validation():
    with pytest.raises(ValueError):
        BalancedRatioParams(Fraction(1, 2), 1)
    with pytest.raises(ValueError):
        BalancedRatioParams(Fraction(0), 1)
    with pytest.raises(ValueError):
        BalancedRatioParams(Fraction(1, 4), 0)


@pytest.mark.parametrize("d", [1, 4])
def test_default_epsilon_kept_below_half(d):
    assert BalancedRatioParams.default(d).epsilon == Fraction(32767, 65536)


@pytest.mark.parametrize("d", [5, 9, 16, 25])
def test_default_params(d):
    p = BalancedRatioParams.default(d)
    assert p.M == math.ceil(math.sqrt(d) / 2)
    assert abs(float(p.epsilon) - 2 ** (-math.sqrt(d) / 2)) <= 2**-16
    assert p.epsilon.denominator <= 1 << 16


def test_balanced_is_closed_interval():
    p = QUARTER
    assert p.balanced(1, 4) and p.balanced(3, 4) and p.balanced(2, 4)
    assert not p.balanced(0, 4) and not p.balanced(4, 4)
    assert not p.balanced(2, 9) and p.balanced(3, 9)


def test_majority_ties_go_to_one():
    assert majority(5, 10) == 1 and majority(4, 10) == 0 and majority(9, 10) == 1


# --------------------------------------------------------------------------- labeling rule


@pytest.mark.parametrize("y_hat", [0, 1])
def test_unbalanced_node_gets_majority(y_hat):
    cls, pts = one_point_class(9, 10)
    adv = BalancedRatioAdversary(cls, params=QUARTER, sequence=pts)
    adv.announce()
    assert adv.label(1, y_hat) == 1
    assert not adv.records[0].forced


@pytest.mark.parametrize("y_hat", [0, 1])
def test_balanced_node_forces_a_mistake(y_hat):
    cls, pts = one_point_class(5, 10)
    adv = BalancedRatioAdversary(cls, params=QUARTER, sequence=pts)
    adv.announce()
    assert adv.label(1, y_hat) == 1 - y_hat
    assert adv.forced_count == 1


def test_clone_is_independent():
    cls, pts = one_point_class(5, 10)
    adv = BalancedRatioAdversary(cls, params=QUARTER, sequence=pts)
    adv.announce()
    twin = adv.clone()
    adv.label(1, 0)
    assert twin.t == 0 and twin.records == [] and len(twin.vs) == 10


# --------------------------------------------------------------------------- sequence construction


@pytest.mark.parametrize("seed", range(5))
def test_construct_sequence_toy_scale(seed):
    cls = SparseClass(4, seed=seed)
    seq = construct_sequence(cls, params=QUARTER)
    assert seq[0] == ROOT
    assert is_ancestry_closed(seq)
    assert len(seq) == len(set(seq))
    assert len(seq) < (4 + 1) * 2 ** (1 + 1)


@settings(max_examples=25)
@given(d=st.integers(1, 7), seed=st.integers(0, 1000), M=st.integers(1, 3), k=st.integers(2, 5))
def test_construct_sequence_properties(d, seed, M, k):
    params = BalancedRatioParams(Fraction(1, 2**k), M)
    plan = construct_sequence(SparseClass(d, seed=seed), params=params, trace=True)
    seq = plan.nodes
    assert seq[0] == ROOT and is_ancestry_closed(seq)
    assert len(seq) == len(set(seq)) == len(plan.enqueued)
    assert len(seq) < (d + 1) * 2 ** (M + 1)
    assert all(x.depth <= d for x in seq)


def test_ancestry_closure_check():
    assert is_ancestry_closed([ROOT, N("0"), N("01")])
    assert not is_ancestry_closed([ROOT, N("01"), N("0")])
    assert not is_ancestry_closed([N("0")])


LEARNERS = [lambda cls: ConstantLearner(0), lambda cls: ConstantLearner(1),
            lambda cls: RandomLearner(7), lambda cls: HalvingLearner(cls)]


def _play(cls, params, learner, track=False):
    adv = BalancedRatioAdversary(cls, params=params, track_paths=track)
    tr = play_transductive(cls, learner, adv)
    return adv, tr


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("make", LEARNERS)
def test_shrinkage_per_transcript(seed, make):
    cls = SparseClass(6, seed=seed)
    params = BalancedRatioParams(Fraction(1, 8), 2)
    adv, tr = _play(cls, params, make(cls))
    assert shrinkage_holds(adv.records, params.epsilon)
    F = adv.forced_count
    n = len(adv.records)
    assert len(adv.vs) >= params.epsilon**F * (1 - params.epsilon) ** (n - F) * len(cls)
    assert tr.forced == F


def test_shrinkage_detects_violation():
    from transonline.adversaries import LabelRecord

    assert not shrinkage_holds([LabelRecord(8, 1, 4, True)], Fraction(1, 4))
    assert shrinkage_holds([LabelRecord(8, 2, 4, True)], Fraction(1, 4))
    assert not shrinkage_holds([LabelRecord(8, 5, 3, False)], Fraction(1, 4))


# small classes have many balanced nodes; M is raised so that some games stay within it
TRACKING = [(4, 4), (5, 5)]


@pytest.mark.parametrize("d,M", TRACKING)
@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("make", LEARNERS)
def test_on_path_node_at_every_depth(d, M, seed, make):
    cls = SparseClass(d, seed=seed)
    params = BalancedRatioParams(Fraction(1, 8), M)
    adv, _ = _play(cls, params, make(cls), track=True)
    if adv.forced_count > params.M:
        pytest.skip("more forced rounds than M")
    depths = {x.depth for x, r in zip(adv.sequence, adv.records) if r.on_path}
    assert depths == set(range(d + 1))


@pytest.mark.parametrize("d,M", TRACKING)
@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("make", LEARNERS)
def test_realized_version_space_is_tracked(d, M, seed, make):
    cls = SparseClass(d, seed=seed)
    params = BalancedRatioParams(Fraction(1, 8), M)
    plan = construct_sequence(cls, params=params, trace=True)
    adv = BalancedRatioAdversary(cls, params=params, sequence=plan.nodes)
    learner = make(cls)
    seq = adv.announce()
    learner.begin(seq)
    assert adv.vs.key in plan.tracked[0]
    for t, x in enumerate(seq, 1):
        y = adv.label(t, learner.predict(t, x))
        learner.observe(t, x, y)
        if adv.forced_count > params.M:
            break
        assert adv.vs.key in plan.tracked[t]


# --------------------------------------------------------------------------- Littlestone-tree adversary


def test_littlestone_adversary_full_three_points_vs_soa():
    d, pts = domain_nodes(3)
    cls = full_class(pts, d)
    tr = play_standard(cls, SOALearner(cls, pts), LittlestoneTreeAdversary(cls, pts), 5)
    assert tr.mistakes == 3


def test_littlestone_adversary_ldim_zero():
    d, pts = domain_nodes(2)
    cls = class_over_points(d, pts, [[0, 1]])
    tr = play_standard(cls, ConstantLearner(0), LittlestoneTreeAdversary(cls, pts), 4)
    assert tr.mistakes == 0


def test_littlestone_adversary_full_two_points_vs_zero():
    d, pts = domain_nodes(2)
    cls = full_class(pts, d)
    tr = play_standard(cls, ConstantLearner(0), LittlestoneTreeAdversary(cls, pts), 2)
    assert tr.mistakes == 2


# --------------------------------------------------------------------------- scripted adversaries


def test_fixed_labels_ignore_predictions():
    d, pts = domain_nodes(3)
    adv = ScriptedAdversary(pts, labels=[1, 0, 1])
    for y_hat in (0, 1):
        a = adv.clone()
        a.announce()
        assert [a.label(t, y_hat) for t in (1, 2, 3)] == [1, 0, 1]


def test_flip_first():
    d, pts = domain_nodes(3)
    adv = scripted_adversary(pts, ("flip", 2, [1, 1, 0]))
    adv.announce()
    assert [adv.label(t, 1) for t in (1, 2, 3)] == [0, 0, 0]


def test_rigid_table_all_stars():
    d, pts = domain_nodes(4)
    cls = full_class(pts, d)
    adv = ScriptedAdversary(pts, default="*")
    for learner in (ConstantLearner(0), ConstantLearner(1), RandomLearner(3)):
        assert play_transductive(cls, learner, adv.clone()).mistakes == 4


def test_rigid_table_constant_zero():
    d, pts = domain_nodes(4)
    cls = full_class(pts, d)
    tr = play_transductive(cls, make_baseline("zero"), ScriptedAdversary(pts, default="0"))
    assert tr.mistakes == 0


def test_missing_table_entry():
    d, pts = domain_nodes(2)
    adv = ScriptedAdversary(pts, table={"": "1"})
    adv.announce()
    adv.label(1, 0)
    with pytest.raises(KeyError):
        adv.label(2, 0)


def test_scripted_validation():
    d, pts = domain_nodes(2)
    with pytest.raises(ValueError):
        ScriptedAdversary(pts, labels=[1])
    with pytest.raises(ValueError):
        ScriptedAdversary(pts)


@pytest.mark.parametrize(
    "text",
    [
        "0,1,00\n101\n",
        "0,1,00\n110\nflip=2\n",
        "λ,0,01\nf: :* 0:1 1:* 01:0 default:0\n",
    ],
)
def test_scripted_round_trip(text):
    adv = parse_scripted(text)
    again = parse_scripted(format_scripted(adv))
    assert again.sequence == adv.sequence
    assert again.labels == adv.labels and again.flip_first == adv.flip_first
    assert again.table == adv.table and again.default == adv.default


def test_scripted_parse_root_alias():
    adv = parse_scripted("λ,0\nf: λ:* -:* 1:0\n")
    assert adv.sequence[0] == ROOT
    assert adv.table == {"": "*", "1": "0"}
    with pytest.raises(ValueError):
        parse_scripted("0\nf: :x\n")
    with pytest.raises(ValueError):
        parse_scripted("0\n")
