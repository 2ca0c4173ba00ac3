import numpy as np
import pytest

from mlpdnn.network import Network, realize


def random_network(rng, dims, scale=1.0):
    return Network(
        [
            (scale * rng.standard_normal((dims[k], dims[k - 1])), scale * rng.standard_normal(dims[k]))
            for k in range(1, len(dims))
        ]
    )


def direct_forward(layers, x):
    # plain-loop oracle, one point at a time
    h = np.asarray(x, dtype=float)
    for k, (w, b) in enumerate(layers):
        h = w @ h + b
        if k < len(layers) - 1:
            h = np.maximum(h, 0.0)
    return h


def rel_close(a, b, rtol):
    a, b = np.asarray(a), np.asarray(b)
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    return float(np.max(np.abs(a - b))) <= rtol * scale


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_problem(rng, d, T=1.0, max_hidden=2, max_width=3):
    """Problem whose f and g are small random ReLU networks (scaled to keep values O(1))."""
    from mlpdnn.problems import Problem

    def net(n_in):
        hidden = [int(v) for v in rng.integers(1, max_width + 1, size=rng.integers(1, max_hidden + 1))]
        return random_network(rng, (n_in, *hidden, 1), scale=0.5)

    phi_f, phi_g = net(d + 1), net(d)
    return Problem(
        name="random",
        d=d,
        T=T,
        f=lambda w: realize(phi_f, w)[:, 0],
        g=lambda x: realize(phi_g, x)[:, 0],
        phi_f=phi_f,
        phi_g=phi_g,
    )


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
