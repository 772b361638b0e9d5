import numpy as np
import pytest

from _helpers import builtin_specs
from ksdgof.models import as_model, random_gbrbm


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=list(builtin_specs()))
def builtin_model(request):
    return as_model(builtin_specs()[request.param], request.param)


@pytest.fixture
def small_rbm():
    return random_gbrbm(10, 5, np.random.default_rng(7), coupling="normal", scale=0.5)



def pytest_terminal_summary(terminalreporter):
    lines = [
        value
        for reports in terminalreporter.stats.values()
        for rep in reports
        if getattr(rep, "when", None) == "call"
        for key, value in getattr(rep, "user_properties", ())
        if key == "acceptance"
    ]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: (int("".join(c for c in s[11:13] if c.isdigit())), s)):
            terminalreporter.write_line(line)
