from __future__ import annotations

import pytest

from flowmend.corpus import build_corpus, get_case
from flowmend.simulator import SignalTrace, StimulusSet, step_count


def make_stim(dt: float, duration: float, **signals) -> StimulusSet:
    """Sample ``name=fn(t)`` (or a constant) on the grid k * dt."""
    n = step_count(duration, dt)
    inputs = {}
    for name, fn in signals.items():
        values = [fn(round(k * dt, 12)) if callable(fn) else fn for k in range(n + 1)]
        inputs[name] = SignalTrace(name, dt, tuple(values))
    return StimulusSet(dt, duration, inputs)


@pytest.fixture(scope="session")
def corpus():
    return build_corpus()


@pytest.fixture(scope="session")
def fridge():
    """The reference fridge controller."""
    return get_case("fridge_1").fixed


@pytest.fixture(scope="session")
def fridge_case():
    return get_case("fridge_1")
