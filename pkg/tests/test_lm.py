import numpy as np
import pytest

from pmrouter._lm import _stalled, levenberg_marquardt


def rosenbrock(x):
    r = np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])
    jac = np.array([[-20 * x[0], 10.0], [-1.0, 0.0]])
    return r, jac


def test_rosenbrock_converges_monotonically():
    res = levenberg_marquardt(rosenbrock, [-1.2, 1.0], check_monotone=True, gtol=1e-12)
    assert res.converged and res.reason == "gtol"
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-10)


def test_linear_problem_and_iteration_cap():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(20, 3))
    b = rng.normal(size=20)
    res = levenberg_marquardt(lambda x: (a @ x - b, a), np.zeros(3), gtol=1e-12)
    assert np.allclose(res.x, np.linalg.lstsq(a, b, rcond=None)[0], atol=1e-10)
    capped = levenberg_marquardt(rosenbrock, [-1.2, 1.0], max_iter=2, gtol=0.0)
    assert not capped.converged and capped.reason == "max_iter"


def test_stall_classification():
    hess = np.diag([1e6, 1.0])
    x = np.zeros(2)
    # remaining decrease below round-off of the cost counts as converged
    assert _stalled(x, 1.0, 1e-9, 5, hess, np.array([1e-9, 0.0])).reason == "precision"
    res = _stalled(x, 1.0, 1e-2, 5, hess, np.array([0.0, 1e-2]))
    assert not res.converged and res.reason == "stalled"


def test_xtol_stop():
    res = levenberg_marquardt(rosenbrock, [-1.2, 1.0], gtol=0.0, xtol=1e-10)
    assert res.converged and res.reason in ("xtol", "gtol")
    assert res.x == pytest.approx([1.0, 1.0], abs=1e-8)
