from __future__ import annotations

import time
from pathlib import Path

import pytest

from telelink.config import parse_topic_table
from telelink.scenario import load_scenario, run_scenario

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"
SCENARIOS = REPO / "scenarios"


@pytest.fixture(scope="session")
def finals_table():
    return parse_topic_table((CONFIGS / "finals.cfg").read_text())


def _timed_run(name: str):
    scenario = load_scenario(SCENARIOS / f"{name}.scn")
    start = time.perf_counter()
    report = run_scenario(scenario)
    report["_wall_s"] = time.perf_counter() - start
    return report


@pytest.fixture(scope="session")
def finals_report():
    """10 simulated seconds of the full finals mix on clean links."""
    return _timed_run("finals_table2")


@pytest.fixture(scope="session")
def qualification_report():
    return _timed_run("qualification")


@pytest.fixture(scope="session")
def redundant_report():
    return _timed_run("finals_redundant")


@pytest.fixture(scope="session")
def redundancy_report():
    """1e5 messages per topic under independent 10%/10% loss."""
    return _timed_run("redundancy_loss")


@pytest.fixture(scope="session")
def ladder_report():
    return _timed_run("recovery_ladder")


@pytest.fixture(scope="session")
def outage_report():
    return _timed_run("outage_recovery")
