"""Shared fixtures and the acceptance-report hook."""

import math

import pytest

import beamselect as bs

# Populated by tests/test_acceptance.py; printed after the run so every
# acceptance criterion gets one visible PASS/FAIL line even under -q.
ACCEPTANCE_RESULTS: list = []


def record_acceptance(number: int, name: str, passed: bool, detail: str):
    ACCEPTANCE_RESULTS.append((number, name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(
            f"criterion {number} ({name}): {status} - {detail}")


@pytest.fixture
def small_scenario() -> bs.Scenario:
    """Cheap scenario for structural tests: M=24, N=12, L=4, D=2."""
    return bs.Scenario(
        seed=7, num_candidates=24, num_selected=12, group_size=4,
        disk_radius_wavelengths=2.0, intended_direction=0.0,
        unintended_directions=(math.radians(65.0), math.radians(-50.0)),
        inr_threshold=10.0, target_snr=10.0, noise_power=0.05,
        lognormal_mean=0.0, lognormal_var=0.2)


@pytest.fixture
def full_scale_scenario() -> bs.Scenario:
    """The recurring reference parameter set (M=512, N=256, R=5, 10 dB SNR)."""
    return bs.Scenario(
        seed=1, num_candidates=512, num_selected=256, group_size=32,
        disk_radius_wavelengths=5.0, intended_direction=0.0,
        unintended_directions=(math.radians(65.0),),
        inr_threshold=10.0, target_snr=10.0, noise_power=0.05,
        lognormal_mean=0.0, lognormal_var=0.2)
