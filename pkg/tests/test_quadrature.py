import numpy as np
import pytest
from scipy.integrate import quad

from qdcoherence import quadrature
from qdcoherence.errors import QuadratureError
from qdcoherence.phonons import geometric_tau_grid


def test_integrate_matches_scipy_quad():
    f = lambda x: np.exp(-x**2) * np.cos(3 * x) * x**2
    val, change = quadrature.integrate(f, 0.0, 6.0, rtol=1e-12)
    ref, _ = quad(f, 0.0, 6.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    assert val == pytest.approx(ref, rel=1e-11)
    assert abs(change) <= 1e-12 * abs(val) + 1e-15


def test_integrate_vector_valued():
    f = lambda x: np.stack([np.sin(x), np.cos(x)])
    val, _ = quadrature.integrate(f, 0.0, np.pi / 2)
    np.testing.assert_allclose(val, [1.0, 1.0], rtol=1e-12)


def test_integrate_reports_non_convergence():
    with pytest.raises(QuadratureError) as exc:
        quadrature.integrate(lambda x: np.sin(400 * x**2), 0, 10, n_panels=1, max_panels=4, where="test")
    assert "test" in str(exc.value)
    assert exc.value.achieved is not None


@pytest.mark.parametrize("w", [0.0, 1e-8, 0.3 + 0.2j, -0.9j, 2.5 - 4j, -30.0, 60j])
def test_exp_moments(w):
    m = quadrature.exp_moments(np.array([w]), kmax=2)
    for k in range(3):
        re = quad(lambda y: (y**k * np.exp(w * y)).real, 0, 1, epsabs=1e-15, limit=200)[0]
        im = quad(lambda y: (y**k * np.exp(w * y)).imag, 0, 1, epsabs=1e-15, limit=200)[0]
        assert m[k, 0] == pytest.approx(re + 1j * im, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("z", [0.0, 0.5, 1.9 + 0.7j, 3j, -0.05j])
def test_laplace_of_exponential_on_geometric_grid(z):
    # slowly rotating exponential, as for g1 in the frame of the laser
    t = geometric_tau_grid(1e-3, 2000.0, 60)
    rate = 1 / 15.0 + 0.01j
    got = quadrature.laplace_sampled(t, np.exp(-rate * t), z)[0]
    assert abs(got - 1 / (rate + z)) < 1e-4 * abs(1 / (rate + z))


def test_laplace_error_falls_with_refinement():
    f = lambda t: np.exp(-t / 3.0) * np.cos(2.0 * t)
    exact = (0.5 + 1 / 3.0) / ((0.5 + 1 / 3.0) ** 2 + 4.0)
    errs = []
    for n in (15, 30, 60):
        t = geometric_tau_grid(1e-3, 300.0, n)
        errs.append(abs(quadrature.laplace_sampled(t, f(t), 0.5)[0] - exact))
    assert errs[2] < errs[1] < errs[0]
    assert errs[1] / errs[2] > 4  # at least second order


def _smoothing_error(n):
    t = np.linspace(0, 40, n)
    g = lambda u: np.exp(-0.2 * u) * (1 + 0.5 * np.sin(u))
    a, b = 1.5 - 0.3j, 1.5 + 0.3j
    left, right = quadrature.exp_smoothing(t, g(t), a, b)
    err = 0.0
    for i in (0, (n - 1) // 8, (n - 1) // 2, n - 1):
        ti = t[i]
        cq = lambda fun, lo, hi: quad(lambda s: fun(s).real, lo, hi, limit=400)[0] + 1j * quad(
            lambda s: fun(s).imag, lo, hi, limit=400)[0]
        lref = cq(lambda s: np.exp(-a * (ti - s)) * g(s), 0, ti) if ti > 0 else 0.0
        rref = cq(lambda s: np.exp(-b * (s - ti)) * g(s), ti, 40)
        err = max(err, abs(left[i] - lref), abs(right[i] - rref))
    return err


def test_exp_smoothing_against_direct_quadrature():
    e1, e2 = _smoothing_error(801), _smoothing_error(1601)
    assert e1 < 1e-4
    assert 3.5 < e1 / e2 < 4.5  # linear interpolation: second order
