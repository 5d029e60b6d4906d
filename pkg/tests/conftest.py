import numpy as np
import pytest

from stringgp.kernels import (
    Linear,
    Matern32,
    Matern52,
    Periodic,
    Polynomial2,
    RationalQuadratic,
    SpectralMixture,
    SquaredExponential,
)


def base_kernels():
    """One instance per family, with unremarkable hyperparameters."""
    return {
        "se": SquaredExponential(variance=1.3, lengthscale=0.7),
        "rq": RationalQuadratic(variance=0.8, lengthscale=0.5, alpha=2.0),
        "matern32": Matern32(variance=1.1, lengthscale=0.9),
        "matern52": Matern52(variance=0.7, lengthscale=0.6),
        "periodic": Periodic(variance=1.0, lengthscale=1.2, period=0.9),
        "sm": SpectralMixture.from_arrays([1.0, 0.5], [0.3, 0.2], [1.0, 2.5]),
        "poly2": Polynomial2(variance=0.5, offset=1.0),
        "linear": Linear(1.0, offset=0.3),
    }


# families usable as string experts (non-degenerate on short intervals)
STRING_FAMILIES = ("se", "rq", "matern32", "matern52", "periodic", "sm")


@pytest.fixture(params=sorted(base_kernels()))
def any_kernel(request):
    return base_kernels()[request.param]


@pytest.fixture(params=STRING_FAMILIES)
def string_family(request):
    return request.param


def fd_first(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2 * h)


def fd_mixed(f, x, y, h=1e-4):
    return (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h)


def rel_close(a, b, rtol, floor):
    """``|a - b| <= rtol * max(|b|, floor)`` elementwise."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.abs(a - b) <= rtol * np.maximum(np.abs(b), floor)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
