import numpy as np
import pytest

from flowcurv import get_model


@pytest.fixture(scope="session")
def models_by_name():
    from flowcurv import registry
    return {name: get_model(name) for name in registry()}


@pytest.fixture(scope="session")
def chua3():
    return get_model("chua3-pwl")


@pytest.fixture(scope="session")
def chua4():
    return get_model("chua4-pwl")


@pytest.fixture(scope="session")
def chua5():
    return get_model("chua5-pwl")


@pytest.fixture(scope="session")
def gear():
    return get_model("gear5")


def in_region_points(model, region, count, seed=0, halfwidth=2.0):
    """Random points that classify into `region` (rejection sampled)."""
    from flowcurv.models import region_box
    rng = np.random.default_rng(seed)
    lo, hi = region_box(model, region, halfwidth=halfwidth)
    points = []
    while len(points) < count:
        x = rng.uniform(lo, hi)
        if model.classify(x) == region:
            points.append(x)
    return points
