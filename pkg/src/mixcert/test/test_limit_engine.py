"""
测试极限引擎：D_j 的各种形式与强极限估计
"""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixcert.core.errors import (
    DigestMismatchError,
    InvalidInputError,
    OutOfCoreError,
    TooFewSamplesError,
)
from mixcert.core.group_core import GroupSpec, LengthFunction, make_net
from mixcert.core.limit_engine import (
    DjSample,
    build_atilde,
    cesaro_form,
    check_atilde_identity,
    d1_discrete,
    d2_continuous,
    d_direct,
    estimate_limit,
    gauss_legendre_unit,
    integral_form,
    integral_form_closed,
    resolvent_d1_form,
    richardson_sequence,
    sample_net,
)
from mixcert.core.operator_core import (
    Operator,
    commuting_family_in_basis,
    random_hermitian,
    random_unitary,
    unitary_exp,
)
from mixcert.core.representation import (
    FlowScenario,
    LatticeMatrixScenario,
    Probe,
    RegularScenario,
    RegularSpace,
    length_multiplier,
    position_multiplier,
)
from mixcert.test.oracles import z2_diagonal_sample
from mixcert.test.strategies import cesaro_inputs

Z1 = GroupSpec.lattice(1)
Z2 = GroupSpec.lattice(2)


def regular_scenario(group, radius, direction, count, kind="length"):
    word = LengthFunction.standard(group)
    space = RegularSpace(group, word, radius)
    multiplier = length_multiplier(space) if kind == "length" else position_multiplier(space)
    net = make_net(group, word, "ray", count, direction=direction)
    return RegularScenario(f"{group.label}-{kind}", space, multiplier, net)


def flow_scenario(n, rng, x, spectra):
    group = GroupSpec.euclidean(len(x))
    net = make_net(group, LengthFunction.standard(group), "ray", 2, direction=x)
    q = random_unitary(n, rng).matrix
    return FlowScenario("flow", commuting_family_in_basis(q, spectra), random_hermitian(n, rng), net)


def test_gauss_legendre_unit_integrates_polynomials():
    s, w = gauss_legendre_unit(8)
    assert w.sum() == pytest.approx(1.0)
    assert np.dot(w, s ** 5) == pytest.approx(1 / 6)
    with pytest.raises(InvalidInputError):
        gauss_legendre_unit(0)


def test_d_direct_on_z_length():
    """Z 上 A = |n|、x = 12 时 D δ_5 = (5 - 7)/12 δ_5 = -(1/6) δ_5"""
    scenario = regular_scenario(Z1, 30, (12,), 2)
    space = scenario.space
    d = d_direct(scenario, 0, space.delta((5,)))
    assert d.support == ((5,),)
    assert d[(5,)] == pytest.approx(-1 / 6)


def test_d_direct_shift_is_identity():
    """Z 上 A = 位置算子时 D_j = I"""
    scenario = regular_scenario(Z1, 40, (1,), 16, kind="position")
    phi = scenario.space.random_vector(np.random.default_rng(0), 4)
    for j in range(16):
        d = d_direct(scenario, j, phi)
        assert (d - phi).norm() <= 1e-14


def test_d_direct_out_of_core():
    scenario = regular_scenario(Z1, 10, (4,), 2)
    with pytest.raises(OutOfCoreError):
        d_direct(scenario, 1, scenario.space.delta((3,)))


def test_sample_net_matches_z2_oracle():
    scenario = regular_scenario(Z2, 40, (1, 1), 12)
    space = scenario.space
    elements = [(0, 0), (1, 0), (2, -1), (-3, 1), (0, 4)]
    probes = [Probe(space.delta(g).label, space.delta(g)) for g in elements]
    samples = sample_net(scenario, probes, max_workers=2)
    assert [s.j for s in samples] == list(range(12))
    for s in samples:
        for g, v in zip(elements, s.vectors):
            assert v[g] == pytest.approx(z2_diagonal_sample(g, s.j + 1), abs=1e-15)


def test_finite_dimensional_samples_decay():
    """有限维场景 ‖D_jφ‖ <= 2‖A‖‖φ‖ / l_j"""
    rng = np.random.default_rng(1)
    net = make_net(Z1, LengthFunction.standard(Z1), "ray", 6, direction=(1000,))
    a = random_hermitian(5, rng)
    scenario = LatticeMatrixScenario("finite", random_unitary(5, rng), a, net)
    phi = rng.normal(size=5) + 1j * rng.normal(size=5)
    for j in range(6):
        d = d_direct(scenario, j, phi)
        assert np.linalg.norm(d) <= 2 * a.norm() * np.linalg.norm(phi) / net.lengths[j] * (1 + 1e-12)


@given(cesaro_inputs(), st.integers(1, 32))
def test_cesaro_form_telescopes(inputs, n):
    u, a, phi = inputs
    np.testing.assert_allclose(cesaro_form(u, a, n, phi), d1_discrete(u, a, n, phi),
                               atol=1e-12 * max(1.0, a.norm()))


def test_d2_continuous_matches_unitary_group():
    rng = np.random.default_rng(3)
    h = random_hermitian(4, rng)
    a = random_hermitian(4, rng)
    phi = rng.normal(size=4) + 1j * rng.normal(size=4)
    v = unitary_exp(h, 2.5).matrix
    expected = (a.matrix @ phi - v @ a.matrix @ v.conj().T @ phi) / 2.5
    np.testing.assert_allclose(d2_continuous(h, a, 2.5, phi), expected, atol=1e-12)
    with pytest.raises(InvalidInputError):
        d2_continuous(h, a, 0.0, phi)


def test_build_atilde_scalar_and_zero():
    """1 维 H = 0 时 Π = -i，Ã = A；A = 0 时 Ã = 0"""
    group = GroupSpec.euclidean(1)
    net = make_net(group, LengthFunction.standard(group), "ray", 2, direction=(1.0,))
    flow = FlowScenario("scalar", [Operator.zeros(1)], Operator.from_hermitian([[2.5]]), net)
    np.testing.assert_allclose(build_atilde(flow).matrix, [[2.5]], atol=1e-15)

    rng = np.random.default_rng(4)
    q = random_unitary(3, rng).matrix
    flow = FlowScenario("zero", commuting_family_in_basis(q, [[0.1, 0.5, -0.3]]),
                        Operator.zeros(3), net)
    assert build_atilde(flow).max_norm() == 0


def test_integral_form_agrees_with_closed_and_resolvent_forms():
    rng = np.random.default_rng(5)
    t = 1.7
    flow = flow_scenario(6, rng, (t,), [rng.uniform(-1.0, 1.0, size=6)])
    phi = rng.normal(size=6) + 1j * rng.normal(size=6)
    quad = integral_form(flow, (t,), phi)
    np.testing.assert_allclose(quad, integral_form_closed(flow, (t,), phi), atol=1e-10)
    np.testing.assert_allclose(quad, resolvent_d1_form(flow.generators[0], flow.conjugate, t, phi),
                               atol=1e-10)


def test_integral_form_is_flow_commutator():
    """D^{int} 与 Ã 上的直接形式一致"""
    rng = np.random.default_rng(6)
    x = (3.0, 4.0)
    flow = flow_scenario(5, rng, x, [rng.uniform(-1, 1, 5), rng.uniform(-1, 1, 5)])
    phi = rng.normal(size=5) + 1j * rng.normal(size=5)
    direct = d_direct(flow, 0, phi)
    np.testing.assert_allclose(integral_form_closed(flow, x, phi), direct, atol=1e-10)


def test_atilde_identity_node_doubling():
    """节点数加倍后残差不增大，64 个节点时不超过 1e-8"""
    rng = np.random.default_rng(7)
    x = (20.0, 25.0)
    grid = np.linspace(-1.0, 1.0, 8)
    flow = flow_scenario(8, rng, x, [grid, grid])
    res32 = check_atilde_identity(flow, x, 32)
    res64 = check_atilde_identity(flow, x, 64)
    atilde = build_atilde(flow)
    floor = 1e-12 * max(1.0, atilde.max_norm() * np.hypot(*x))
    assert res64 <= max(res32, floor)
    assert res64 <= 1e-8


def make_samples(values, ells, digest="s"):
    return [DjSample(j, ell, tuple(np.asarray(v, dtype=complex) for v in row), digest)
            for j, (ell, row) in enumerate(zip(ells, values))]


def test_estimate_limit_needs_enough_samples():
    samples = make_samples([[[1.0]]] * 3, [1, 2, 3])
    with pytest.raises(TooFewSamplesError):
        estimate_limit(samples, k=3)
    with pytest.raises(TooFewSamplesError):
        estimate_limit(make_samples([[[1.0]]] * 4, [1, 2, 3, 4]), k=3, richardson=True)


def test_estimate_limit_constant_sequence():
    samples = make_samples([[[1.0, 2.0]]] * 5, [1, 2, 3, 4, 5])
    estimate = estimate_limit(samples, k=3, probe_ids=["only"])
    assert estimate.converged
    np.testing.assert_array_equal(estimate.limit("only"), [1.0, 2.0])
    assert estimate.residuals == ((0.0,) * 5,)
    with pytest.raises(KeyError):
        estimate.limit("missing")


def test_estimate_limit_digest_mismatch():
    samples = make_samples([[[1.0]]] * 5, [1, 2, 3, 4, 5])
    samples[2] = DjSample(2, 3, samples[2].vectors, "other")
    with pytest.raises(DigestMismatchError):
        estimate_limit(samples)


def test_richardson_removes_one_over_length_term():
    """S_j = -1 + c/l_j：不外推时不收敛，外推后精确为 -1"""
    ells = [2.0 * (j + 1) for j in range(10)]
    values = [[[-1.0 + 3.0 / ell, -1.0 - 0.5 / ell]] for ell in ells]
    plain = estimate_limit(make_samples(values, ells), eps_conv=1e-8, k=3)
    assert not plain.converged

    extrapolated = estimate_limit(make_samples(values, ells), eps_conv=1e-8, k=3, richardson=True)
    assert extrapolated.converged
    np.testing.assert_allclose(extrapolated.limits[0], [-1.0, -1.0], atol=1e-13)
    assert len(richardson_sequence(ells, [v[0][0] for v in values])) == len(ells) - 1


def test_z2_regular_limit_is_minus_identity():
    scenario = regular_scenario(Z2, 48, (1, 1), 16)
    space = scenario.space
    probes = [Probe(space.delta(g).label, space.delta(g)) for g in space.basis if space.ell(g) <= 2]
    samples = sample_net(scenario, probes)
    estimate = estimate_limit(samples, eps_conv=1e-8, k=3, richardson=True,
                              probe_ids=[p.probe_id for p in probes])
    assert estimate.converged
    for p in probes:
        assert (estimate.limit(p.probe_id) + p.vector).norm() <= 1e-12
