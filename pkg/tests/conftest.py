import logging

import numpy as np
import pytest
import torch

from cellbloom.synthetic import SyntheticDomainSpec, generate_synthetic_domains

# single-threaded keeps runtimes predictable and runs bit-reproducible
torch.set_num_threads(1)
logging.getLogger("cellbloom").setLevel(logging.WARNING)


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, name): acceptance criterion covered by this test"
    )
    config.addinivalue_line("markers", "slow: long-running desk-scale test")


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for name, value in report.user_properties:
        if name == "criterion":
            number, label = value
            status = "PASS" if report.passed else "FAIL"
            print(f"\n[acceptance] criterion {number} ({label}): {status}")


@pytest.fixture(autouse=True)
def _record_criterion(request, record_property):
    marker = request.node.get_closest_marker("criterion")
    if marker is not None:
        record_property("criterion", (marker.args[0], marker.args[1]))
    yield


@pytest.fixture(scope="session")
def small_domains(tmp_path_factory):
    """Small synthetic two-domain dataset shared by fast tests: 12 images
    per class per domain at 24x24."""
    root = tmp_path_factory.mktemp("small_domains")
    spec = SyntheticDomainSpec(per_class=12, image_size=24, seed=101)
    cells, flowers = generate_synthetic_domains(spec, root)
    return cells, flowers


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
