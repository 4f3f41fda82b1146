import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BRANCHED, PENDULUM
from fastbench import decart
from fastbench.model import ModelError, parse_model, reduce_coordinates, serialize_model, validate_model


def _robot(links, joints):
    return f'<robot name="t">{links}{joints}</robot>'


LINK = '<link name="{0}"><inertial><mass value="1"/><inertia ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.01"/></inertial></link>'
LIMIT = '<limit effort="10" velocity="5" lower="-1" upper="1"/>'


def _joint(name, parent, child, kind="revolute", extra=""):
    lim = LIMIT if kind != "fixed" else ""
    return (f'<joint name="{name}" type="{kind}"><parent link="{parent}"/><child link="{child}"/>'
            f'<axis xyz="0 1 0"/>{lim}{extra}</joint>')


MIMIC_PAIR = _robot(
    "".join(LINK.format(n) for n in "abc"),
    _joint("A", "a", "b") + _joint("B", "b", "c", extra='<mimic joint="A" multiplier="-1"/>'),
)


def test_pendulum_has_one_dof(pendulum):
    assert pendulum.independent_dof == 1
    assert pendulum.independent_joints == ("swing",)
    assert validate_model(pendulum) == []


def test_mimic_column_has_one_and_minus_one():
    m = parse_model(MIMIC_PAIR)
    assert m.independent_dof == 1
    assert m.full_joints == ("A", "B")
    assert sorted(m.reduction_map[:, 0]) == [-1.0, 1.0]


def test_bundled_decart_leg_has_six_independent_joints():
    m = parse_model(decart.bundled_path("decoupled").read_text(), hip_frame="hip", foot_frame="foot")
    assert m.independent_dof == 6
    assert len(m.full_joints) == 8
    assert sum(j.mimic is not None for j in m.joints) == 2


def test_identity_reduction(pendulum):
    np.testing.assert_array_equal(reduce_coordinates(pendulum, [0.5]), [0.5])


def test_knee_gears_follow_leg_length_joint(decart_model):
    q = np.zeros(6)
    q[decart_model.independent_joints.index("j3_leg_length")] = -0.6
    full = dict(zip(decart_model.full_joints, reduce_coordinates(decart_model, q)))
    assert full["j3p_knee_upper"] == -0.6
    assert full["j3p_knee_lower"] == -0.6


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=4, max_size=4))
def test_every_mimic_relation_holds(values):
    # per-joint recomputation, independent of the reduction map
    m = parse_model(BRANCHED, foot_frame="e")
    q = np.array(values)
    full = dict(zip(m.full_joints, reduce_coordinates(m, q)))
    ind = dict(zip(m.independent_joints, q))
    for j in m.joints:
        if not j.moves:
            continue
        if j.mimic is None:
            assert full[j.name] == ind[j.name]
        else:
            assert full[j.name] == j.mimic.multiplier * ind[j.mimic.joint] + j.mimic.offset


def test_reduce_coordinates_rates_skip_offset(branched):
    q, v, a = reduce_coordinates(branched, np.zeros(4), np.ones(4), np.ones(4))
    k = branched.full_joints.index("j_d")
    assert q[k] == 0.1
    assert v[k] == -0.5 and a[k] == -0.5


def test_reduce_coordinates_rejects_wrong_length(pendulum):
    with pytest.raises(ValueError):
        reduce_coordinates(pendulum, [0.0, 1.0])


def test_parse_is_deterministic():
    assert parse_model(BRANCHED, foot_frame="e") == parse_model(BRANCHED, foot_frame="e")


@pytest.mark.parametrize("doc", [PENDULUM, BRANCHED, MIMIC_PAIR], ids=["pendulum", "branched", "mimic"])
def test_serialize_round_trip(doc):
    foot = "e" if doc is BRANCHED else None
    m = parse_model(doc, foot_frame=foot)
    again = parse_model(serialize_model(m), foot_frame=m.foot_frame)
    assert again == m
    np.testing.assert_array_equal(again.reduction_map, m.reduction_map)
    np.testing.assert_array_equal(again.offset, m.offset)


def test_visual_and_collision_are_ignored():
    doc = PENDULUM.replace('<link name="tip"/>',
                           '<link name="tip"><visual><geometry/></visual><collision/></link>')
    assert parse_model(doc) == parse_model(PENDULUM)


@pytest.mark.parametrize(
    "doc, fragment",
    [
        ("<robot><link name='a'>", "malformed"),
        ("<model/>", "unsupported element"),
        (_robot(LINK.format("a") + "<sensor/>", ""), "sensor"),
        (_robot(LINK.format("a") + LINK.format("a"), ""), "duplicate link"),
        (_robot("".join(LINK.format(n) for n in "abc"), _joint("A", "a", "b") + _joint("A", "b", "c")),
         "duplicate joint"),
        (_robot("".join(LINK.format(n) for n in "ab"), _joint("A", "a", "zz")), "unknown link"),
        (_robot("".join(LINK.format(n) for n in "abc"), _joint("A", "a", "c") + _joint("B", "b", "c")),
         "more than one parent"),
        (_robot("".join(LINK.format(n) for n in "abc"), _joint("A", "b", "c") + _joint("B", "c", "b")),
         "cyclic"),
        (_robot("".join(LINK.format(n) for n in "ab"), _joint("A", "a", "b", kind="floating")), "floating"),
        (_robot("".join(LINK.format(n) for n in "abc"),
                _joint("A", "a", "b", kind="fixed") + _joint("B", "b", "c", extra='<mimic joint="A"/>')),
         "mimics unknown or fixed"),
        (_robot("".join(LINK.format(n) for n in "ab"), _joint("B", "a", "b", extra='<mimic joint="Q"/>')),
         "mimics unknown or fixed"),
        (_robot("".join(LINK.format(n) for n in "abcd"),
                _joint("A", "a", "b") + _joint("B", "b", "c", extra='<mimic joint="A"/>')
                + _joint("C", "c", "d", extra='<mimic joint="B"/>')),
         "mimic chain"),
        (_robot("".join(LINK.format(n) for n in "ab"),
                '<joint name="A" type="revolute"><parent link="a"/><child link="b"/><axis xyz="0 1 0"/></joint>'),
         "no <limit>"),
        (_robot(LINK.format("a") + LINK.format("b").replace('value="1"', 'value="-1"'), _joint("A", "a", "b")),
         "negative mass"),
        (_robot("".join(LINK.format(n) for n in "ab"),
                _joint("A", "a", "b").replace('xyz="0 1 0"', 'xyz="0 2 0"')),
         "axis norm"),
    ],
    ids=["xml", "root", "element", "dup-link", "dup-joint", "unknown-link", "two-parents", "cycle", "kind",
         "mimic-fixed", "mimic-unknown", "mimic-chain", "no-limit", "neg-mass", "axis"],
)
def test_malformed_descriptions_are_rejected(doc, fragment):
    with pytest.raises(ModelError, match=fragment):
        parse_model(doc, foot_frame="b" if "name='a'" not in doc and "<model" not in doc else None)


def test_triangle_inequality_violation_names_the_body():
    doc = _robot(
        LINK.format("a")
        + '<link name="bad"><inertial><mass value="1"/>'
          '<inertia ixx="1" ixy="0" ixz="0" iyy="1" iyz="0" izz="3"/></inertial></link>',
        _joint("A", "a", "bad"),
    )
    problems = validate_model(parse_model(doc, validate=False))
    assert len(problems) == 1
    assert "'bad'" in problems[0] and "triangle" in problems[0]
    with pytest.raises(ModelError):
        parse_model(doc)


def test_zero_effort_gives_one_diagnostic():
    doc = PENDULUM.replace('effort="50"', 'effort="0"')
    problems = validate_model(parse_model(doc, validate=False))
    assert len(problems) == 1 and "effort_max" in problems[0]


def test_foot_frame_must_be_given_for_branched_tree():
    with pytest.raises(ModelError, match="foot frame"):
        parse_model(BRANCHED)


def test_limit_scaling_and_frames(pendulum):
    m = pendulum.with_scaled_limits(2.0, 0.5)
    assert m.effort_max[0] == 100.0 and m.velocity_max[0] == 10.0
    assert pendulum.effort_max[0] == 50.0
    with pytest.raises(ModelError):
        pendulum.with_frames(foot_frame="nowhere")


def test_damping_is_parsed():
    from conftest import double_pendulum_xml

    m = parse_model(double_pendulum_xml(damping=0.3), foot_frame="tip")
    np.testing.assert_array_equal(m.damping, [0.3, 0.3])
