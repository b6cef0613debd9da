import itertools
import math

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def enumerate_slot(p_free, pfa, pd, alpha, slot_t, tau, tau_ho, c0, c1):
    """Brute-force (rate, sensed channels) over every free/busy and decision outcome.

    Walks the sensing sequence outcome by outcome instead of using the
    product-form sums, so it is an independent route to the same numbers.
    """
    n = alpha + 1
    rate = sensed = 0.0
    for states in itertools.product((0, 1), repeat=n):          # 1 = busy
        p_state = math.prod(p_free[k] if s == 0 else 1 - p_free[k] for k, s in enumerate(states))
        for decisions in itertools.product((0, 1), repeat=n):   # 1 = declared busy
            p = p_state
            for s, d in zip(states, decisions):
                pbusy = pd if s else pfa
                p *= pbusy if d else 1 - pbusy
            if p == 0.0:
                continue
            # first idle declaration transmits; all-busy means the last channel was sensed
            m = next((k for k, d in enumerate(decisions) if d == 0), None)
            if m is None:
                sensed += p * n
                continue
            sensed += p * (m + 1)
            left = 1.0 - (tau + m * (tau + tau_ho)) / slot_t
            rate += p * (c1 if states[m] else c0) * left
    return rate, sensed


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""
    def _report(number, passed, text):
        line = f"[criterion {number}] {'PASS' if passed else 'FAIL'}  {text}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
