import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from smokedet import synth
from smokedet.config import PipelineConfig
from smokedet.pipeline import train_pipeline_models

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance outcomes collected by tests/test_acceptance.py, printed at session end
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def trained():
    """Models trained once on small synthetic corpora, shared by pipeline tests."""
    config = PipelineConfig()
    smoke = synth.smoke_corpus(4, 60, seed=1)
    nonsmoke = synth.nonsmoke_corpus(4, 60, seed=1)
    tex, st, report = train_pipeline_models(smoke, nonsmoke, config)
    return config, tex, st, report
