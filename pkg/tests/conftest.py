import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci", derandomize=True, max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

from viscoflow import engine  # noqa: E402
from viscoflow.cli import resolve_config, scenario_names  # noqa: E402
from viscoflow.config import build_experiment  # noqa: E402


@pytest.fixture(scope="session")
def scenario_runs():
    """One full run per bundled scenario, shared by the whole suite."""
    runs = {}
    for name in scenario_names():
        exp = build_experiment(resolve_config(name))
        trace = engine.run(exp.x0, exp.f_effective, exp.family, exp.alpha, exp.stop)
        runs[name] = (exp, trace)
    return runs


@pytest.fixture(scope="session")
def scenario_qmaps(scenario_runs):
    """Path-refined limit estimates for every scenario."""
    out = {}
    for name, (exp, _) in scenario_runs.items():
        out[name] = engine.estimate_q_map(exp.f_effective, exp.family.reference,
                                          tol=1e-4, x_init=exp.x0)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
