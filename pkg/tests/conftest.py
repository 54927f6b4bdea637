import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cdsal.synth import SynthSpec, generate

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_bundle():
    """Short synthetic sequence: 2 GOPs, planted static region, twin viewings."""
    return generate(SynthSpec(sequence_id="tiny", frame_count=24, seed=7))


@pytest.fixture(scope="session")
def small_bundles():
    return [generate(SynthSpec(sequence_id=f"seq{k}", frame_count=12, seed=20 + k)) for k in range(2)]


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed", "xfailed", "xpassed"):
        for rep in terminalreporter.stats.get(key, []):
            if getattr(rep, "when", "call") == "call":
                lines.extend(v for k, v in getattr(rep, "user_properties", ()) if k == "acceptance")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("#")[1].split()[0])):
            terminalreporter.write_line(line)
