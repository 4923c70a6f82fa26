import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from discevo import lattice_ops as lo
from discevo.exceptions import ConstraintViolation, InvalidArgument


def _rand_state(rng, window, m):
    n = window[1] - window[0] + 1
    return lo.LatticeState(window, 0.0, rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m)))


@pytest.mark.parametrize("s,m", [(1, 1), (2, 1), (3, 2), (1, 3)])
def test_apply_matches_dense(s, m):
    rng = np.random.default_rng(s * 10 + m)
    A = lo.random_banded(rng, s, (-7, 9), m=m)
    x = _rand_state(rng, A.window, m)
    got = lo.apply(A, x).values.ravel()
    np.testing.assert_allclose(got, A.to_dense() @ x.values.ravel(), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=hst.integers(0, 10_000), s=hst.integers(1, 3), m=hst.integers(1, 2))
def test_adjoint_properties(seed, s, m):
    rng = np.random.default_rng(seed)
    A = lo.random_banded(rng, s, (-5, 6), m=m)
    Ad = lo.adjoint(A)
    np.testing.assert_allclose(Ad.to_dense(), A.to_dense().conj().T, atol=1e-14)
    assert lo.adjoint(Ad) == A
    x, y = _rand_state(rng, A.window, m), _rand_state(rng, A.window, m)
    lhs = np.vdot(lo.apply(A, x).values, y.values)
    rhs = np.vdot(x.values, lo.apply(Ad, y).values)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_entrywise_adjoint_keeps_positions():
    rng = np.random.default_rng(3)
    A = lo.random_banded(rng, 1, (-3, 3), m=2)
    B = lo.entrywise_adjoint(A)
    np.testing.assert_array_equal(B.entry(0, 1), A.entry(0, 1).conj().T)


def test_laplacian_constants_and_boundary():
    A = lo.build_laplacian_1d(1.0, (-5, 5))
    c = lo.audit_constants(A)
    assert (c.a, c.delta) == (2.0, 1.0)
    assert A.boundary_policy == "zero_pad"
    D = A.to_dense()
    assert D[0, 0] == -2 and D[0, 1] == 1 and D.shape == (11, 11)
    assert np.all(A.entry(-5, -6) == 0)


def test_json_roundtrip_and_schema():
    rng = np.random.default_rng(1)
    A = lo.random_banded(rng, 2, (-4, 4), m=2)
    doc = json.loads(A.to_json())
    assert set(doc) == {"s", "m", "window", "entries"}
    assert lo.BandedOperator.from_json(A.to_json()) == A
    with pytest.raises(InvalidArgument):
        lo.BandedOperator.from_dict({"s": 1, "m": 1, "window": [0, 3],
                                     "entries": [{"j": 0, "k": 3, "block": [[1, 0]]}]})


def test_singular_external_block_rejected():
    blocks = np.zeros((7, 3), dtype=complex)
    blocks[:, 0] = blocks[:, 2] = 1.0
    blocks[3, 2] = 0.0
    with pytest.raises(ConstraintViolation) as info:
        lo.BandedOperator(1, (0, 6), blocks)
    assert info.value.index == (3, 4)
    A = lo.BandedOperator(1, (0, 6), blocks, check_external=False)
    with pytest.raises(ConstraintViolation):
        lo.audit_constants(A)


def test_scaling_keeps_threshold_ratio():
    A = lo.build_laplacian_1d(1.0, (-6, 6))
    c1 = lo.audit_constants(A)
    c3 = lo.audit_constants(A.scaled(-3j))
    assert c3.a == pytest.approx(3 * c1.a) and c3.delta == pytest.approx(3 * c1.delta)


def test_builders():
    H = lo.build_higher_order_model(3, (-10, 10))
    assert H.entry(0, 3)[0, 0] == 1 and H.entry(0, 0)[0, 0] == -2 and H.entry(0, 1)[0, 0] == 0
    with pytest.raises(InvalidArgument):
        lo.build_higher_order_model(3, (0, 5))
    V = np.arange(5.0)
    S = lo.build_schrodinger_with_potential(2.0, V)
    assert S.window == (-2, 2)
    assert S.entry(1, 1)[0, 0] == pytest.approx(2.0 * (V[3] - 2))
    with pytest.raises(InvalidArgument):
        lo.build_schrodinger_with_potential(1.0, [1.0, np.inf])


def test_random_banded_respects_bounds():
    rng = np.random.default_rng(5)
    A = lo.random_banded(rng, 2, (-10, 10), m=2)
    c = lo.audit_constants(A)
    assert c.delta >= 0.5 - 1e-12 and c.a <= 2.0 + 1e-12


def test_state_validation_and_helpers():
    with pytest.raises(InvalidArgument):
        lo.LatticeState((0, 3), 0.0, np.zeros(3))
    with pytest.raises(InvalidArgument):
        lo.LatticeState((3, 0), 0.0, np.zeros(3))
    d = lo.LatticeState.delta((-2, 2), 1)
    assert d.at(1)[0] == 1 and d.at(9)[0] == 0
    logs, direction = d.log_parts()
    assert logs[3] == 0 and direction[3, 0] == 1 and direction[0, 0] == 0
    assert lo.retime(d, 2.0).t == 2.0
