"""
测试截断正则表示、矩阵表示与流
"""
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from loguru import logger

from mixcert.core.errors import (
    CommutationError,
    InfeasibleError,
    InvalidInputError,
    OutOfCoreError,
)
from mixcert.core.group_core import (
    GroupSpec,
    LengthFunction,
    enumerate_ball,
    make_net,
    word_decompose,
)
from mixcert.core.operator_core import Operator, random_unitary
from mixcert.core.representation import (
    FlowScenario,
    RegularSpace,
    coefficient,
    length_multiplier,
    matrix_rep,
    position_multiplier,
    regular_apply,
    regular_commutator,
    regular_commutator_by_actions,
    rep_from_word,
    safe_core_radius,
)
from mixcert.test.oracles import ball_size
from mixcert.test.strategies import group_elements, integer_probes

Z1 = GroupSpec.lattice(1)
Z2 = GroupSpec.lattice(2)
F2 = GroupSpec.free(2)


def regular_space(group, radius):
    return RegularSpace(group, LengthFunction.standard(group), radius)


@lru_cache(maxsize=None)
def cached_space(group, radius):
    return regular_space(group, radius)


def test_regular_space_basis_is_ball():
    for group, radius in ((Z2, 3), (F2, 2)):
        space = regular_space(group, radius)
        assert space.dim == ball_size(group, radius)
        assert all(space.index[g] == k for k, g in enumerate(space.basis))


def test_regular_apply_translates_support():
    """δ_0 平移 3 得到 δ_3；离开截断球的质量被报告"""
    space = regular_space(Z1, 5)
    delta = space.delta((0,))
    moved = regular_apply(space, (3,), delta)
    assert moved.vector.coeffs == {(3,): 1.0}
    assert moved.lost_mass == 0
    assert regular_apply(space, (0,), delta).vector.coeffs == delta.coeffs

    lost = regular_apply(space, (6,), delta)
    assert len(lost.vector) == 0
    assert lost.lost_mass == 1.0


@pytest.mark.parametrize("group", [Z2, F2])
@given(data=st.data())
def test_regular_apply_composition_on_safe_core(group, data):
    """安全核内 U(x)U(y) = U(xy)、U(x^{-1})U(x) = I，且不丢失质量"""
    space = cached_space(group, 8)
    x, y = data.draw(group_elements(group, 3)), data.draw(group_elements(group, 3))
    phi = data.draw(integer_probes(space, 2))
    inner = regular_apply(space, y, phi)
    step = regular_apply(space, x, inner.vector)
    direct = regular_apply(space, group.product(x, y), phi)
    assert inner.lost_mass == step.lost_mass == direct.lost_mass == 0
    assert step.vector.coeffs == direct.vector.coeffs
    assert step.vector.norm() == pytest.approx(phi.norm())
    back = regular_apply(space, group.inverse(x), regular_apply(space, x, phi).vector).vector
    assert back.coeffs == phi.coeffs


def test_length_multiplier():
    space = regular_space(Z2, 6)
    a = length_multiplier(space)
    assert len(a.apply(space.delta((0, 0)))) == 0
    assert a.apply(space.delta((3, -2))).coeffs == {(3, -2): 5.0}
    rng = np.random.default_rng(1)
    phi = space.random_vector(rng, 6)
    assert a.apply(phi).norm() <= space.radius * phi.norm()


def test_position_multiplier_only_on_z():
    with pytest.raises(InvalidInputError):
        position_multiplier(regular_space(Z2, 2))
    space = regular_space(Z1, 4)
    assert position_multiplier(space).apply(space.delta((-3,))).coeffs == {(-3,): -3.0}


def test_regular_commutator_closed_form():
    """(l(g) - l(x^{-1}g))φ(g) 的整数取值"""
    space = regular_space(Z1, 20)
    assert regular_commutator(space, (3,), space.delta((5,))).coeffs == {(5,): 3.0}
    assert regular_commutator(space, (3,), space.delta((-5,))).coeffs == {(-5,): -3.0}
    assert len(regular_commutator(space, (0,), space.delta((5,)))) == 0


def test_regular_commutator_matches_actions_and_bound():
    """闭式与按作用计算精确相等，乘子的模不超过 l(x)"""
    for group, radius, x in ((Z2, 8, (2, -1)), (F2, 6, F2.parse_element("aB"))):
        space = regular_space(group, radius)
        ell_x = space.ell(x)
        members = [g for g in enumerate_ball(group, radius - ell_x)]
        phi = space.vector({g: 1.0 for g in members})
        closed = regular_commutator(space, x, phi)
        by_actions = regular_commutator_by_actions(space, x, phi)
        assert closed.coeffs == by_actions.coeffs
        assert all(abs(c) <= ell_x for c in closed.coeffs.values())


@pytest.mark.parametrize("group", [Z1, Z2, F2])
@given(data=st.data())
def test_regular_commutator_closed_form_equals_actions(group, data):
    space = cached_space(group, 6)
    x = data.draw(group_elements(group, 3))
    phi = data.draw(integer_probes(space, 2))
    multipliers = [length_multiplier(space)]
    if group == Z1:
        multipliers.append(position_multiplier(space))
    for multiplier in multipliers:
        closed = regular_commutator(space, x, phi, multiplier)
        assert closed.coeffs == regular_commutator_by_actions(space, x, phi, multiplier).coeffs


def test_regular_commutator_out_of_core():
    space = regular_space(Z1, 6)
    with pytest.raises(OutOfCoreError):
        regular_commutator(space, (4,), space.delta((3,)))


def test_coefficient_support_overlap():
    space = regular_space(Z1, 10)
    delta = space.delta((0,))
    assert coefficient(delta, (0,), delta) == 1
    assert coefficient(delta, (3,), delta) == 0


def test_coefficient_vanishes_beyond_supports():
    """l(x) > r_φ + r_ψ 时系数精确为 0"""
    space = regular_space(Z2, 12)
    phi = space.ball_indicator(2)
    for j in range(1, 6):
        value = coefficient(phi, (j, j), phi)
        if 2 * j > 4:
            assert value == 0
        else:
            assert value != 0


def test_matrix_rep_powers():
    theta = 0.37
    u0 = Operator(np.diag(np.exp(1j * np.array([theta, -2 * theta]))), unitary=True)
    np.testing.assert_allclose(matrix_rep(u0, 0).matrix, np.eye(2))
    np.testing.assert_allclose(matrix_rep(u0, 2).matrix,
                               np.diag(np.exp(2j * np.array([theta, -2 * theta]))), atol=1e-14)
    np.testing.assert_allclose(matrix_rep(u0, (-3,)).matrix,
                               np.diag(np.exp(-3j * np.array([theta, -2 * theta]))), atol=1e-14)


def test_matrix_rep_huge_power_stays_unitary():
    """大指数投影回酉群，投影前的偏差写入 DEBUG 日志"""
    rng = np.random.default_rng(2)
    u0 = random_unitary(4, rng)
    messages = []
    handler = logger.add(messages.append, level="DEBUG", format="{message}")
    try:
        assert matrix_rep(u0, 10 ** 9).unitary
    finally:
        logger.remove(handler)
    assert any("投影回酉群前" in m for m in messages)


def test_flow_unitary_diagonal():
    """H_1 = diag(1,0)、H_2 = diag(0,1)、x = (π,π) 时 U(x) = -I"""
    group = GroupSpec.euclidean(2)
    net = make_net(group, LengthFunction.standard(group), "ray", 2, direction=(1.0, 1.0))
    flow = FlowScenario("diag", [Operator.from_hermitian(np.diag([1.0, 0.0])),
                                 Operator.from_hermitian(np.diag([0.0, 1.0]))],
                        Operator.zeros(2), net)
    np.testing.assert_allclose(matrix_rep(flow, (np.pi, np.pi)).matrix, -np.eye(2), atol=1e-14)
    np.testing.assert_allclose(matrix_rep(flow, (0.0, 0.0)).matrix, np.eye(2), atol=1e-15)


def test_flow_requires_commuting_generators():
    group = GroupSpec.euclidean(2)
    net = make_net(group, LengthFunction.standard(group), "ray", 2, direction=(1.0, 0.0))
    x = Operator.from_hermitian(np.array([[0, 1], [1, 0]]))
    z = Operator.from_hermitian(np.diag([1.0, -1.0]))
    with pytest.raises(CommutationError):
        FlowScenario("bad", [x, z], Operator.zeros(2), net)


def test_rep_from_word_matches_lattice_rep():
    """对易酉算子上按词重组等于 ΠU_k^{n_k}"""
    rng = np.random.default_rng(3)
    q = random_unitary(3, rng).matrix
    u1 = Operator((q * np.exp(1j * rng.uniform(0, 6, 3))) @ q.conj().T, unitary=True)
    u2 = Operator((q * np.exp(1j * rng.uniform(0, 6, 3))) @ q.conj().T, unitary=True)
    x = (2, -3)
    by_word = rep_from_word([u1, u2], word_decompose(Z2, x))
    np.testing.assert_allclose(by_word.matrix, matrix_rep([u1, u2], x).matrix, atol=1e-12)


def test_safe_core_radius():
    word = LengthFunction.standard(Z2)
    net = make_net(Z2, word, "ray", 8, direction=(1, 1))
    assert safe_core_radius(net, 48) == 32
    assert safe_core_radius(net, 16) == 0
    with pytest.raises(InfeasibleError) as info:
        safe_core_radius(net, 8)
    assert info.value.minimal_radius == 16
