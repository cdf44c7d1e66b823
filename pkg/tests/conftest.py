import random

import pytest
from hypothesis import HealthCheck, settings

from fairdiv.core import Instance, perturb

settings.register_profile(
    "repo", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

E1_VALUES = [1, 299, 101, 101, 101, 98, 98, 99, 99, 100]


@pytest.fixture
def e1():
    return Instance([E1_VALUES] * 3, label="E1")


@pytest.fixture
def e1_perturbed(e1):
    return perturb(e1)


def random_rows(rng: random.Random, n: int, m: int, vmax: int = 20):
    return [[rng.randint(0, vmax) for _ in range(m)] for _ in range(n)]


def pytest_terminal_summary(terminalreporter):
    results = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            if rep.when != "call" and outcome == "passed":
                continue
            name = nodeid.split("::", 1)[1]
            results[name] = "PASS" if outcome == "passed" else "FAIL"
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")

    def num(name):
        return int(name.split("_")[2])

    for name in sorted(results, key=num):
        terminalreporter.write_line(f"criterion {num(name)}: {results[name]}  ({name})")
