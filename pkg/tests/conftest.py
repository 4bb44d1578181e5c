import pytest

from plapcert.certificates import compute_constants
from plapcert.problem import PAPER_EXAMPLE_CONFIG, paper_example, parse_config


@pytest.fixture(scope="session")
def spec():
    return paper_example()


@pytest.fixture(scope="session")
def constants(spec):
    return compute_constants(spec)


def make_spec(**overrides):
    """The worked example with some config keys replaced, e.g. ``make_spec(f1="1", p1="2")``."""
    lines = []
    for line in PAPER_EXAMPLE_CONFIG.splitlines():
        key = line.split("=", 1)[0].strip()
        if "=" in line and key in overrides:
            line = f"{key} = {overrides.pop(key)}"
        lines.append(line)
    text = "\n".join(lines) + "\n"
    numerics = {k: overrides.pop(k) for k in list(overrides) if k.startswith("numerics_")}
    assert not overrides, f"unknown keys {sorted(overrides)}"
    if numerics:
        text += "\n[numerics]\n" + "".join(f"{k[9:]} = {v}\n" for k, v in numerics.items())
    return parse_config(text)


def linear_spec(**overrides):
    """p1 = p2 = 2, g = f = 1, B = 0: every integral has a closed form."""
    base = dict(p1="2", p2="2", g1="1", g2="1", f1="1", f2="1", B1="0", B2="0",
                h11="0", h12="0", h21="0", h22="0")
    base.update(overrides)
    return make_spec(**base)


# One line per acceptance criterion, printed after the test run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
