import io

import numpy as np
import pytest

from discevo import eigen_engine as eig
from discevo import lattice_ops as lo
from discevo.exceptions import ConstraintViolation, InvalidArgument


def test_laplacian_zero_eigenvalue_is_linear():
    A = lo.build_laplacian_1d(1.0, (-20, 20))
    fam = eig.extend_eigenvector(A, [[0.0], [1.0]], 0.0)
    np.testing.assert_allclose(fam.values[:, 0], A.indices + 1, atol=1e-12)
    assert eig.verify_eigen(A, fam) < 1e-14


def test_growth_rate_matches_characteristic_root():
    A = lo.build_laplacian_1d(1.0, (-60, 60))
    fam = eig.extend_eigenvector(A, eig.unit_seeds(1, 0), 10.0)
    logs = fam.log_norms()
    rate = (logs[-1] - logs[-21]) / 20
    root = (12 + np.sqrt(140)) / 2
    assert rate == pytest.approx(np.log(root), rel=1e-3)


@pytest.mark.parametrize("s,m", [(1, 1), (2, 1), (3, 1), (2, 2)])
def test_random_residuals_and_growth(s, m):
    rng = np.random.default_rng(7 * s + m)
    for _ in range(5):
        A = lo.random_banded(rng, s, (-50, 50), m=m)
        lam = 8 * (rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1))
        fam = eig.extend_eigenvector(A, rng.normal(size=(2 * s, m)), lam)
        assert eig.verify_eigen(A, fam) < 1e-10
        assert eig.growth_audit(fam, lo.audit_constants(A)).bound_holds


def test_huge_growth_is_kept_in_log_domain():
    A = lo.build_laplacian_1d(1.0, (-400, 400))
    fam = eig.extend_eigenvector(A, eig.unit_seeds(1, 0), 1e3)
    logs = np.delete(fam.log_norms(), 399)  # e_{-1} is the zero seed
    assert np.all(np.isfinite(logs))
    assert logs[-1] > 1000


def test_polynomial_degree_via_interpolation():
    rng = np.random.default_rng(2)
    s = 2
    A = lo.random_banded(rng, s, (-12, 12))
    coeffs = eig.interpolate_in_lambda(A, eig.unit_seeds(s, 0), 16)
    for i, j in enumerate(A.indices):
        bound = abs(j) // s + 1
        assert np.max(np.abs(coeffs[bound:, i])) < 1e-8 * max(1.0, np.max(np.abs(coeffs[:, i])))


def test_singular_external_block():
    blocks = np.zeros((21, 3), dtype=complex)
    blocks[:, 0] = blocks[:, 2] = 1.0
    blocks[15, 0] = 0.0  # A_{5,4}, the pivot (A*)_{4,5} of the forward sweep
    A = lo.BandedOperator(1, (-10, 10), blocks, check_external=False)
    with pytest.raises(ConstraintViolation):
        eig.extend_eigenvector(A, eig.unit_seeds(1, 0), 0.5)


def test_window_must_hold_seeds():
    A = lo.build_laplacian_1d(1.0, (-1, 3))
    with pytest.raises(InvalidArgument):
        eig.extend_eigenvector(A, eig.unit_seeds(1, 0), 0.0)


def test_csv_output():
    A = lo.build_laplacian_1d(1.0, (-3, 3))
    fam = eig.extend_eigenvector(A, eig.unit_seeds(1, 0), 0.5 + 0.5j)
    buf = io.StringIO()
    fam.to_csv(buf)
    header = buf.getvalue().splitlines()[0]
    assert header.endswith("lambda_re,lambda_im")


def test_band_step():
    assert [eig.band_step(j, 2) for j in (1, 2, 3, 4, 5)] == [0, 0, 1, 1, 2]
    assert eig.band_step(-1, 2) == -1
