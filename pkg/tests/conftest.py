import numpy as np
import pytest

from pufkit import PopulationConfig, PufInstance, create_population


def hand_instance(deviations, instance_id=0, **overrides):
    """Instance with explicit deviations; noise off unless overridden."""
    params = dict(n_oscillators=len(deviations), sigma_noise=0.0)
    params.update(overrides)
    return PufInstance(instance_id, np.asarray(deviations, dtype=float), PopulationConfig(**params))


@pytest.fixture
def noiseless_config():
    return PopulationConfig(n_oscillators=16, sigma_noise=0.0, seed=11)


@pytest.fixture
def default_population():
    return create_population(PopulationConfig(n_oscillators=128, sigma_noise=0.0005, seed=3), 20)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion, then assert it."""

    def check(number: int, ok: bool, detail: str):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
