import io
import math

import numpy as np
import pytest
import scipy.linalg

from discevo import evolution as evo
from discevo import lattice_ops as lo
from discevo.exceptions import InvalidArgument, ResourceError, UnsupportedArgument


@pytest.mark.parametrize("scale", [0.01, 1.0, 30.0, 400.0])
def test_expm_matches_scipy(scale):
    rng = np.random.default_rng(int(scale * 100))
    M = scale * (rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))) / 12
    ref = scipy.linalg.expm(M)
    np.testing.assert_allclose(evo.expm(M), ref, rtol=1e-11, atol=1e-13 * np.abs(ref).max())


def test_propagate_heat_against_closed_form():
    W = (-128, 128)
    A = lo.build_laplacian_1d(0.5, W)
    traj = evo.propagate(A, lo.LatticeState.delta(W, 0), [0.0, 0.4, 1.0])
    for st in traj.states:
        ref = evo.model_solution_heat(0.5, st.t, 0.0, W).scalar()
        sel = np.abs(A.indices) <= 100
        assert np.max(np.abs(st.scalar()[sel] - ref[sel])) <= 1e-13


def test_propagate_imaginary_alpha_matches_bessel_j_form():
    W = (-100, 100)
    A = lo.build_laplacian_1d(1j, W)
    traj = evo.propagate(A, lo.LatticeState.delta(W, 0), [0.0, 1.0])
    ref = evo.model_solution_heat(1j, 1.0, 0.0, W).scalar()
    sel = np.abs(A.indices) <= 60
    assert np.max(np.abs(traj.states[1].scalar()[sel] - ref[sel])) <= 1e-12


def test_propagate_errors():
    A = lo.build_laplacian_1d(1.0, (-5, 5))
    u0 = lo.LatticeState.delta(A.window, 0)
    with pytest.raises(InvalidArgument):
        evo.propagate(A, u0, [0.0, 0.0])
    with pytest.raises(InvalidArgument):
        evo.propagate(A, u0, [1.0, 2.0])
    with pytest.raises(InvalidArgument):
        evo.propagate(A, lo.LatticeState.delta((-4, 4), 0), [0.0, 1.0])
    big = lo.build_laplacian_1d(1.0, (-1100, 1100))
    with pytest.raises(ResourceError):
        evo.propagate(big, lo.LatticeState.delta(big.window, 0), [0.0, 1.0])


def test_trajectory_csv_columns():
    A = lo.build_laplacian_1d(1.0, (-2, 2))
    traj = evo.propagate(A, lo.LatticeState.delta(A.window, 0), [0.0, 0.5])
    buf = io.StringIO()
    traj.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,n,block_index,re,im,log_abs"
    assert len(lines) == 1 + 2 * 5


def test_heat_model_residual_via_recurrence():
    W = (-40, 40)
    for t in (0.2, 0.9):
        u = evo.model_solution_heat(1.0, t, 0.0, W).scalar()
        h = 1e-5
        up = evo.model_solution_heat(1.0, t + h, 0.0, W).scalar()
        um = evo.model_solution_heat(1.0, t - h, 0.0, W).scalar()
        du = (up - um) / (2 * h)
        lap = u[2:] + u[:-2] - 2 * u[1:-1]
        assert np.max(np.abs(du[1:-1] - lap)) < 1e-8


def test_heat_model_general_complex_alpha_unsupported():
    with pytest.raises(UnsupportedArgument):
        evo.model_solution_heat(1 + 1j, 0.5, 0.0, (-3, 3))


def _dudt(fn, t, h=1e-5):
    return (fn(t + h) - fn(t - h)) / (2 * h)


def test_schrodinger_sequence_solves_plus_i_laplacian():
    W = (-30, 30)
    f = lambda t: evo.model_solution_schrodinger(t, W).scalar()
    for t in (0.0, 0.25, 0.75):
        u = f(t)
        lap = u[2:] + u[:-2] - 2 * u[1:-1]
        du = _dudt(f, t)[1:-1]
        assert np.max(np.abs(du - 1j * lap)) < 1e-8
        assert np.max(np.abs(du + 1j * lap)) > 0.1
        # the conjugate sequence solves the -i form
        assert np.max(np.abs(np.conj(du) + 1j * np.conj(lap))) < 1e-8


@pytest.mark.parametrize("s", [1, 2, 3])
def test_higher_order_model(s):
    W = (-30, 30)
    A = lo.build_higher_order_model(s, W)
    lo_i, hi_i = A.interior
    sel = (A.indices >= lo_i) & (A.indices <= hi_i)
    C = np.arange(1, s + 1)
    for damped, shift in ((True, 0.0), (False, 2.0)):
        f = lambda t: evo.model_solution_higher(s, C, t, -0.3, W, damped=damped).scalar()
        u = evo.model_solution_higher(s, C, 0.4, -0.3, W, damped=damped)
        Au = lo.apply(A, u).scalar() + shift * u.scalar()
        assert np.max(np.abs(_dudt(f, 0.4)[sel] - Au[sel])) < 1e-7


def test_log_abs_and_phase_consistent():
    st = evo.model_solution_heat(1.0, 0.0, 0.5, (-300, 300))
    nz = np.abs(st.scalar()) > 1e-300  # subnormals carry fewer digits
    np.testing.assert_allclose(np.log(np.abs(st.scalar()[nz])), st.log_abs[nz], rtol=1e-12)
    assert np.all(np.isfinite(st.log_abs))
    np.testing.assert_allclose(st.phase[nz], np.sign(st.scalar()[nz].real))


def test_weighted_energy_audit_heat():
    W = (-200, 200)
    A = lo.build_laplacian_1d(1.0, W)
    times = np.linspace(0, 1, 11)
    traj = evo.Trajectory(A, times, [evo.model_solution_heat(1.0, t, -20.0, W) for t in times])
    reps = evo.weighted_energy_audit(traj, [2, 4, 8])
    for r in reps:
        assert r.bound_satisfied
        assert r.fitted_C1 <= r.sharp_C1 + 1e-9
    with pytest.raises(InvalidArgument):
        evo.weighted_energy_audit(traj, [1.0])


@pytest.mark.parametrize("B", [2.0, 4.0, 8.0])
def test_sharp_constant_laplacian_formula(B):
    A = lo.build_laplacian_1d(1.0, (-300, 300))
    ref = (2 * (math.sqrt(B) + 1 / math.sqrt(B)) - 4) / B
    assert evo.sharp_growth_constant(A, B) == pytest.approx(ref, abs=1e-4)


def test_lemma_log_bound():
    st = evo.model_solution_heat(1.0, 1.0, 0.0, (-60, 60))
    for j in (1, 5, 20, 40):
        assert st.log_abs[j + 60] <= evo.lemma_log_bound(st, j, 1) + 1e-12
