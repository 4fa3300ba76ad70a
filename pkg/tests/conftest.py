"""Shared test fixtures and the independent integration oracle.

The oracle is a fixed-step classical RK4 in velocity form,

    dq/dt = p,   dp/dt = (1 - p^2)^(3/2) * f(t, q, p),

driven by plain Python callables. It shares nothing with the package's
integrator: different method, different step control (none), different
working variable (velocity, not regularized momentum), no expression
evaluator. Frozen expected values in the tests were produced by these same
helpers at step 1e-6 and are quoted with their provenance where used.
"""

import math
import time

import pytest

from relosc import (
    SegmentGeometry,
    find_periodic,
    pendulum,
    rotating_field,
)


def rk4_integrate(force, t0, q0, p0, t_end, n_steps):
    """Velocity-form classical RK4 with a hardcoded force callable."""
    h = (t_end - t0) / n_steps
    t, q, p = t0, q0, p0
    pow_ = math.pow
    for _ in range(n_steps):
        k1q = p
        k1p = pow_(1.0 - p * p, 1.5) * force(t, q, p)
        q2, p2 = q + 0.5 * h * k1q, p + 0.5 * h * k1p
        k2q = p2
        k2p = pow_(1.0 - p2 * p2, 1.5) * force(t + 0.5 * h, q2, p2)
        q3, p3 = q + 0.5 * h * k2q, p + 0.5 * h * k2p
        k3q = p3
        k3p = pow_(1.0 - p3 * p3, 1.5) * force(t + 0.5 * h, q3, p3)
        q4, p4 = q + h * k3q, p + h * k3p
        k4q = p4
        k4p = pow_(1.0 - p4 * p4, 1.5) * force(t + h, q4, p4)
        q += h * (k1q + 2.0 * k2q + 2.0 * k3q + k4q) / 6.0
        p += h * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0
        t += h
    return q, p


def force_case_a(t, q, p):
    """Autonomous pendulum, alpha = 1."""
    return math.sin(q)


def force_case_b(t, q, p):
    """Forced pendulum, f_ext = 0.5*cos(2*pi*t), alpha = 1."""
    return 0.5 * math.cos(2.0 * math.pi * t) + math.sin(q)


def force_case_c(t, q, p):
    """Rotating field, f0 = 5, psi = 0.1*sin(2*pi*t)."""
    psi = 0.1 * math.sin(2.0 * math.pi * t)
    return 5.0 * (math.cos(q) * math.sin(psi) - math.sin(q) * math.cos(psi))


class SearchRun:
    """A find_periodic run with its scenario, geometry, and wall-clock time."""

    def __init__(self, scenario):
        self.scenario = scenario
        self.geometry = SegmentGeometry(scenario.barriers, scenario.problem)
        start = time.perf_counter()
        self.solutions = find_periodic(scenario.problem, self.geometry)
        self.elapsed = time.perf_counter() - start


@pytest.fixture(scope="session")
def scenario_a():
    return pendulum(alpha=1.0, gamma=0.0, f_ext="0", period=1.0)


@pytest.fixture(scope="session")
def scenario_b():
    return pendulum(alpha=1.0, gamma=0.0, f_ext="0.5*cos(2*pi*t)", period=1.0)


@pytest.fixture(scope="session")
def scenario_c():
    return rotating_field(f_mag="5", psi="0.1*sin(2*pi*t)", gamma=0.0, period=1.0)


@pytest.fixture(scope="session")
def geometry_a(scenario_a):
    return SegmentGeometry(scenario_a.barriers, scenario_a.problem)


@pytest.fixture(scope="session")
def geometry_b(scenario_b):
    return SegmentGeometry(scenario_b.barriers, scenario_b.problem)


@pytest.fixture(scope="session")
def geometry_c(scenario_c):
    return SegmentGeometry(scenario_c.barriers, scenario_c.problem)


@pytest.fixture(scope="session")
def search_a(scenario_a):
    return SearchRun(scenario_a)


@pytest.fixture(scope="session")
def search_b(scenario_b):
    return SearchRun(scenario_b)


@pytest.fixture(scope="session")
def search_c(scenario_c):
    return SearchRun(scenario_c)
