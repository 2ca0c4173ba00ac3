import numpy as np
import pytest

from conftest import rel_close
from mlpdnn.network import param_count, realize
from mlpdnn.problems import (
    PROBLEM_NAMES,
    Problem,
    check_theorem_conditions,
    conditions_hold,
    construction_kappa,
    make_problem,
    make_sine_problem,
    pde_residual,
    sin_approx_network,
    smallest_passing_c,
)
from mlpdnn.solver import reference_solution


@pytest.mark.parametrize("name", ["transport", "linear-affine", "linear-quadratic"])
def test_pde_residual_of_closed_forms(name, rng):
    problem = make_problem(name, 3)
    for _ in range(10):
        t = rng.uniform(0.05, 0.95)
        x = rng.uniform(-1, 1, 3)
        assert abs(pde_residual(problem, t, x)) <= 1e-6


def test_transport_values():
    p = make_problem("transport", 4)
    ref = reference_solution(p, 0.0, np.array([0.3, 0.1, 0.2, 0.5]))
    np.testing.assert_allclose(ref, [1.3, 1, 0, 0, 0])
    np.testing.assert_allclose(reference_solution(p, 1.0, np.array([0.7, 0, 0, 0]))[0], 0.7)
    half = make_problem("transport", 2, coupling=0.5)
    assert reference_solution(half, 0.0, np.array([0.3, 0.0]))[0] == pytest.approx(0.8)


def test_linear_heat_values():
    q = make_problem("linear-quadratic", 3)
    assert reference_solution(q, 0.0, np.zeros(3))[0] == pytest.approx(3.0)
    np.testing.assert_allclose(reference_solution(q, 0.0, np.array([1.0, 0, 0]))[1:], [2, 0, 0])
    a = make_problem("linear-affine", 3)
    assert reference_solution(a, 0.37, np.array([1.0, -2.0, 0.5]))[0] == pytest.approx(-0.5)


@pytest.mark.parametrize("name", ["transport", "linear-affine", "sine"])
def test_networks_realize_the_functions(name, rng):
    p = make_problem(name, 3, eps=0.05)
    w = rng.uniform(-5, 5, (1000, 4))
    x = rng.uniform(-5, 5, (1000, 3))
    assert rel_close(realize(p.phi_f, w)[:, 0], p.f(w), 1e-12)
    assert rel_close(realize(p.phi_g, x)[:, 0], p.g(x), 1e-12)


def test_problem_name_errors():
    assert set(PROBLEM_NAMES) == {"transport", "linear-affine", "linear-quadratic", "sine"}
    with pytest.raises(ValueError):
        make_problem("burgers", 2)


@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_sine_approximant_bound(eps):
    gamma = sin_approx_network(eps)
    x = np.linspace(-20, 20, 10_000)
    vals = realize(gamma.network, x[:, None])[:, 0]
    np.testing.assert_allclose(vals, gamma(x), rtol=1e-12, atol=1e-12)
    assert np.max(np.abs(np.sin(x) - vals) / (1 + np.abs(x) ** 1.5)) <= eps


def test_sine_approximant_structure(rng):
    gamma = sin_approx_network(0.1)
    assert gamma.network.depth == 3
    assert gamma(0.0) == 0.0 and abs(realize(gamma.network, np.zeros(1))[0]) <= 1e-14
    x, y = rng.uniform(-30, 30, (2, 10_000))
    assert np.all(np.abs(gamma(x) - gamma(y)) <= np.abs(x - y) * (1 + 1e-12))
    with pytest.raises(ValueError):
        sin_approx_network(1.0)


def test_sine_problem_structure(rng):
    d = 3
    p = make_sine_problem(d, 0.1)
    assert p.phi_f.depth == p.phi_g.depth == 5
    kappa = construction_kappa()
    for eps in (0.2, 0.1, 0.05):
        q = make_sine_problem(d, eps)
        assert max(param_count(q.phi_f), param_count(q.phi_g)) <= 640 * kappa**2 * d**2 * eps**-6
    w1, w2 = rng.uniform(-10, 10, (2, 10_000, d + 1))
    assert np.all(np.abs(p.f(w1) - p.f(w2)) <= np.abs(w1 - w2).sum(axis=1) / (d + 1) * (1 + 1e-12))
    assert p.lipschitz_weights.sum() <= 1.0 + 1e-15


def test_conditions_sine_pass():
    report = check_theorem_conditions(make_sine_problem(2, 0.1), c=2, q=1.5, beta=2)
    assert all(v is not None for v in report.values())
    assert conditions_hold(report)
    assert smallest_passing_c(make_sine_problem(2, 0.1), 1.5, 2.0) == 2.0


def test_conditions_transport_growth():
    report = check_theorem_conditions(make_problem("transport", 3), c=2, q=1.5, beta=2, box=10.0)
    assert report["growth"] <= 1.0
    assert report["f_approximation"] is None


def test_conditions_broken_problem_flagged():
    base = make_problem("linear-quadratic", 2)
    broken = Problem(
        name="broken", d=2, T=1.0, f=base.f, g=base.g, g_target=lambda x: np.zeros(len(x)), epsilon=0.1,
    )
    report = check_theorem_conditions(broken, c=2, q=1.5, beta=0.0)
    assert report["growth"] > 1.0 and report["g_approximation"] > 1.0
    assert not conditions_hold(report)
