import io
import math

import numpy as np
import pytest

from discevo import lattice_ops as lo
from discevo import stationary as st
from discevo.exceptions import PreconditionViolation


def test_kernel_thresholds():
    A = lo.build_laplacian_1d(1.0, (-10, 10))
    assert st.kernel_decay_threshold(lo.audit_constants(A), 1) == 0.25
    assert st.kernel_decay_threshold(lo.audit_constants(A.scaled(5 - 2j)), 1) == pytest.approx(0.25)
    assert st.kernel_decay_threshold(lo.BandConstants(a=1.0, delta=1.0), 2) == 0.25


@pytest.mark.parametrize("d,v,ref", [(1, 0.0, -3), (2, 1.0, -8), (3, 0.5, -11.5)])
def test_schrodinger_threshold(d, v, ref):
    assert st.schrodinger_threshold(d, v) == ref


def test_schrodinger_threshold_monotone():
    assert st.schrodinger_threshold(2, 0) < st.schrodinger_threshold(1, 0)
    assert st.schrodinger_threshold(1, 2) < st.schrodinger_threshold(1, 1)


def test_kernel_vectors_respect_rate():
    rng = np.random.default_rng(3)
    for i in range(20):
        s = 1 + i % 2
        A = lo.random_banded(rng, s, (-60, 60))
        u = st.kernel_vector(A, rng.normal(size=(2 * s, 1)))
        v = st.check_stationary_decay(u, A)
        assert v.rate_estimate >= math.log(v.threshold) - 0.2
        assert not v.forces_zero


def test_kernel_vector_of_schrodinger():
    rng = np.random.default_rng(5)
    V = rng.uniform(-1, 1, size=121)
    A = lo.build_schrodinger_with_potential(1.0, V, (-60, 60))
    u = st.kernel_vector(A, rng.normal(size=(2, 1)))
    assert st.check_stationary_decay(u, A).rate_estimate >= math.log(0.25) - 0.2


def test_zero_and_fast_decay():
    A = lo.build_laplacian_1d(1.0, (-30, 30))
    v = st.check_stationary_decay(lo.LatticeState.zeros(A.window), A)
    assert v.degenerate and v.forces_zero
    fast = lo.LatticeState(A.window, 0.0, 8.0 ** -np.abs(A.indices.astype(float)))
    with pytest.raises(PreconditionViolation) as info:
        st.check_stationary_decay(fast, A)
    assert info.value.residual > 1e-10


def test_shell_audit_1d():
    u, V = st.exponential_eigenfunction_1d(30)
    a = st.shell_decay_audit(u, V)
    assert a.violations == 0
    assert a.rate_estimate == pytest.approx(math.log(2 - math.sqrt(3)), abs=1e-9)
    assert a.threshold == -5 and not a.forces_zero
    buf = io.StringIO()
    a.to_csv(buf)
    assert buf.getvalue().splitlines()[0] == "N,shell_max,log_shell_max,inequality_slack"


def test_shell_audit_2d_separable():
    u, V = st.separable_eigenfunction([st.exponential_eigenfunction_1d(20)] * 2)
    a = st.shell_decay_audit(u, V)
    assert a.violations == 0 and a.threshold == -11


def test_shell_audit_zero_and_bad_residual():
    z = np.zeros((11, 11))
    assert st.shell_decay_audit(z, z).vacuous
    u, V = st.exponential_eigenfunction_1d(10)
    with pytest.raises(PreconditionViolation):
        st.shell_decay_audit(u, V + 0.1)


def test_shell_radius_uses_absolute_values():
    r = st.shell_radius((5, 5))
    assert r[0, 0] == 2 and r[2, 2] == 0 and r[0, 2] == 2
