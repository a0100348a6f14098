import numpy as np
import pytest

from rlpar.dataio import FeatureScaler, SynthSpec, generate_synthetic
from rlpar.qnet import QNetwork
from rlpar.schema import AttributeSchema, GroupConfig
from rlpar.trainer import GroupAgent, TrainedModel

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert."""

    def record(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_synth():
    spec = SynthSpec(n=60, n_features=6, n_attributes=5, rates=(0.3, 0.2, 0.4, 0.25, 0.35), snr=4.0, seed=3)
    return spec, generate_synthetic(spec, "train"), generate_synthetic(spec, "test", n=20)


@pytest.fixture
def two_groups():
    return GroupConfig((("a", (0, 1, 2)), ("b", (3, 4))), 5)


def attribute_lookup_net(n_features, L, present):
    """Network whose greedy action at a step is ``present[attr]`` for the attribute in context slot 0."""
    d_in = n_features + 3 * L
    W1 = np.zeros((L, d_in))
    W1[np.arange(L), n_features + np.arange(L)] = 1.0
    W2 = np.eye(L)
    W3 = np.zeros((2, L))
    for a, p in enumerate(present):
        W3[1 if p else 0, a] = 1.0
    return QNetwork([W1, np.zeros(L), W2, np.zeros(L), W3, np.zeros(2)])


def lookup_model(names, groups, present, n_features=3):
    schema = AttributeSchema(tuple(names))
    net = attribute_lookup_net(n_features, schema.L, present)
    agents = [
        GroupAgent(group=g, name=name, attrs=attrs, policy=net.copy(), target=net.copy(), opt=None,
                   memory=None, stats=None, rho=None)
        for g, (name, attrs) in enumerate(groups.groups)
    ]
    return TrainedModel(schema, groups, FeatureScaler.identity(n_features), agents, n_features)
