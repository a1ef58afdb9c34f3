"""Shared fixtures and the acceptance-check reporter.

The acceptance module records one PASS/FAIL line per check; they are
echoed in a terminal section at the end of the run so the verdicts are
visible even when every test passes.
"""

import random

import pytest

from policycast import absc
from policycast.groups import GroupContext

PROFILES = ("SYMMETRIC_512", "ASYMMETRIC_159")

ACCEPTANCE = []


def record_acceptance(name, ok, detail=""):
    line = f"[acceptance] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    ACCEPTANCE.append(line)
    print(line, flush=True)
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE:
        terminalreporter.section("acceptance checks")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ctx_sym():
    return GroupContext("SYMMETRIC_512")


@pytest.fixture(scope="session")
def ctx_asym():
    return GroupContext("ASYMMETRIC_159")


@pytest.fixture(scope="session")
def scheme_sym(ctx_sym):
    return absc.setup(ctx_sym, random.Random(0xC0FFEE))


@pytest.fixture(scope="session")
def scheme_asym(ctx_asym):
    return absc.setup(ctx_asym, random.Random(0xC0FFEE))


@pytest.fixture(scope="session", params=PROFILES)
def scheme(request, scheme_sym, scheme_asym):
    """(pp, mk) for each profile in turn."""
    return scheme_sym if request.param == "SYMMETRIC_512" else scheme_asym
