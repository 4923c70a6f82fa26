import io
import json
import math

import numpy as np
import pytest

from discevo import evolution as evo
from discevo import lattice_ops as lo
from discevo import uniqueness_probe as up
from discevo.eigen_engine import extend_eigenvector
from discevo.exceptions import InvalidArgument, PreconditionViolation


@pytest.fixture
def lap():
    return lo.build_laplacian_1d(1.0, (-60, 60))


def test_phi_basics(lap):
    assert up.phi_at(lo.LatticeState.zeros(lap.window), lap, 1.0).value == 0
    assert up.phi_at(lo.LatticeState.delta(lap.window, 0), lap, 0.0).value == 1
    rng = np.random.default_rng(0)
    u = lo.LatticeState(lap.window, 0.0, np.exp(-np.abs(lap.indices)) * rng.normal(size=lap.size))
    a = 2 - 3j
    p1 = up.phi_at(u, lap, 0.5 + 1j).value
    p2 = up.phi_at(u.with_values(a * u.values), lap, 0.5 + 1j).value
    assert p2 == pytest.approx(a * p1, rel=1e-12)


def test_pairing_sign_on_laplacian(lap):
    # d/dt phi = lam phi along the heat flow, for complex lam
    W = lap.window
    lam = 0.8 - 0.6j
    f = lambda t: up.phi_at(evo.model_solution_heat(1.0, t, 0.0, W), lap, lam).value
    h = 1e-5
    d = (f(0.5 + h) - f(0.5 - h)) / (2 * h)
    assert d == pytest.approx(lam * f(0.5), rel=1e-7)


def test_entire_identity(lap):
    traj = evo.propagate(lap, lo.LatticeState.delta(lap.window, 0), [0.0, 0.5, 1.0])
    rep = up.check_entire_identity(traj, lap)
    assert len(rep.lambdas) == 25
    assert rep.defect_max < 1e-6
    single = evo.Trajectory(lap, [0.0], traj.states[:1])
    assert up.check_entire_identity(single, lap).defect_max == 0


def test_truncation_warning(lap):
    flat = lo.LatticeState(lap.window, 0.0, np.ones(lap.size))
    assert up.phi_at(flat, lap, 1.0).truncation_warning
    assert not up.phi_at(lo.LatticeState.delta(lap.window, 0), lap, 1.0).truncation_warning


def test_phi_is_polynomial_of_bounded_degree():
    A = lo.build_laplacian_1d(1.0, (-30, 30))
    rng = np.random.default_rng(1)
    N = 6
    vals = np.zeros(A.size, dtype=complex)
    vals[30 - N:30 + N + 1] = rng.normal(size=2 * N + 1)
    u = lo.LatticeState(A.window, 0.0, vals)
    npts = 16
    nodes = np.exp(2j * np.pi * np.arange(npts) / npts)
    samples = np.array([up.phi_at(u, A, z).value for z in nodes])
    coeffs = np.fft.fft(samples) / npts
    assert np.max(np.abs(coeffs[N + 2:])) < 1e-12 * np.max(np.abs(coeffs))


def test_decay_audit_examples():
    T = 1.0
    W = (-80, 80)
    z = lo.LatticeState.zeros(W)
    assert up.decay_audit(z, z, T, 1.0, 0.0, 1).verdict == up.SUB_CRITICAL
    h0 = evo.model_solution_heat(1.0, 0.0, T / 2, W)
    hT = evo.model_solution_heat(1.0, T, T / 2, W)
    rep = up.decay_audit(h0, hT, T, 1.0, 0.0, 1)
    assert rep.verdict == up.CRITICAL
    assert np.all(np.abs(rep.margins) <= rep.band)
    e = up.envelope_state(W, T, 1.0, 1.0)
    assert up.decay_audit(e, e, T, 1.0, 1.0, 1).verdict == up.SUB_CRITICAL
    with pytest.raises(InvalidArgument):
        up.decay_audit(h0, lo.LatticeState.zeros((-10, 10)), T, 1.0, 0.0, 1)


def test_growth_bound_check():
    A = lo.build_laplacian_1d(1.0, (-60, 60))
    T = 1.0
    grid = np.concatenate([r * np.exp(2j * np.pi * np.arange(8) / 8) for r in np.linspace(1, 10, 10)])
    e = up.envelope_state(A.window, T, 1.0, 1.0)
    rep = up.growth_bound_check(e, e, A, T, 1.0, grid)
    assert rep.holds
    z = lo.LatticeState.zeros(A.window)
    assert up.growth_bound_check(z, z, A, T, 1.0, grid).holds
    h0 = evo.model_solution_heat(1.0, 0.0, T / 2, A.window)
    hT = evo.model_solution_heat(1.0, T, T / 2, A.window)
    with pytest.raises(PreconditionViolation):
        up.growth_bound_check(h0, hT, A, T, 0.0, grid)


def test_indicator_synthetic_and_polynomial(lap):
    radii = np.linspace(1, 10, 10)
    c = 0.7
    syn = [up.PhiSample(r, 0.0, c * r) for r in radii]
    assert up.indicator_estimate(syn).slope == pytest.approx(c, abs=1e-6)
    poly = up.ray_samples(lo.LatticeState.delta(lap.window, 3), lap, 0.0, np.linspace(10, 200, 10))
    est = up.indicator_estimate(poly)
    assert est.near_zero and 0 < est.slope < 0.05
    zeros = [up.PhiSample(r, 0.0, -math.inf) for r in radii]
    assert up.indicator_estimate(zeros).undefined
    with pytest.raises(InvalidArgument):
        up.indicator_estimate(syn[:5])


def test_indicator_difference_heat():
    T = 1.0
    W = (-100, 100)
    A = lo.build_laplacian_1d(1.0, W)
    radii = np.linspace(2, 20, 10)
    h0 = up.indicator_estimate(up.ray_samples(evo.model_solution_heat(1.0, 0.0, T / 2, W), A, 0.0, radii))
    hT = up.indicator_estimate(up.ray_samples(evo.model_solution_heat(1.0, T, T / 2, W), A, 0.0, radii))
    assert hT.slope - h0.slope == pytest.approx(T, rel=0.1)


def test_weighted_alpha_norm():
    c = np.array([3.0, 4.0])
    assert up.weighted_alpha_norm(c, 0.0) == pytest.approx(5.0)
    e = np.zeros(5)
    e[3] = 2.0
    assert up.weighted_alpha_norm(e, 1.5) == pytest.approx(4 ** 0.75 * 2.0)
    assert up.weighted_alpha_norm([1.0, 1.0], 2.0) == pytest.approx(math.sqrt(5))
    st = lo.LatticeState.delta((-2, 2), 1)
    assert up.phi_norm(st, 0.0) == pytest.approx(math.exp(0.5))


def test_sharpness_experiment():
    res = up.sharpness_experiment()
    assert res.within_band
    assert res.decay.verdict == up.CRITICAL
    for cand in res.candidates.values():
        if cand["verdict"] == up.SUB_CRITICAL:
            assert cand["max_moment"] < 1e-7


def test_report_and_csv():
    samples = [up.PhiSample(1 + 1j, 0.5, 0.25, 1j)]
    buf = io.StringIO()
    up.write_phi_csv(buf, samples)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "lambda_re,lambda_im,t,log_abs_phi,arg_phi"
    assert rows[1].split(",")[4] == repr(math.pi / 2)
    doc = json.loads(up.experiment_report("x", 1e-9, "critical", [up.IndicatorEstimate(0.0, 0.5, (1, 2))], [0.1]))
    assert set(doc) == {"experiment", "defect_max", "verdict", "indicator", "margins"}
