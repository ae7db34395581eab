import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import BUILTINS
from odfc import MethodKind, eval_f, gain_at, make_system
from odfc.core import is_active_node


def test_make_system_builtins():
    s = make_system("linear", 0.0, 2.0)
    assert s.lam == 2.0
    assert eval_f(s, 0.5) == 1.0
    assert eval_f(s, 0.0) == 0.0
    c = make_system("cubic_minus", 0.0)
    assert c.lam == 2.0
    assert eval_f(c, 0.5) == pytest.approx(2 * 0.5 - 0.5 ** 3)


def test_eval_f_examples():
    assert eval_f(make_system("sinsq"), 0.0) == 0.0
    assert eval_f(make_system("quad"), 0.5) == pytest.approx(1.25, abs=1e-15)


@pytest.mark.parametrize("kind", BUILTINS)
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("x_star", [0.0, 1.5])
def test_builtin_invariants(kind, lam, x_star):
    s = make_system(kind, x_star, lam)
    assert abs(eval_f(s, x_star)) < 1e-12
    h = 1e-6
    slope = (eval_f(s, x_star + h) - eval_f(s, x_star - h)) / (2 * h)
    assert slope == pytest.approx(lam, rel=1e-5)


def test_polynomial_plant():
    # (x - 1)(x + 1) = x^2 - 1: root at 1 with slope 2
    s = make_system([-1.0, 0.0, 1.0], x_star=1.0)
    assert s.lam == pytest.approx(2.0)
    assert eval_f(s, 1.0) == 0.0
    assert eval_f(s, 3.0) == pytest.approx(8.0)
    assert s.g(0.0) == 0.0


@pytest.mark.parametrize("bad", [
    lambda: make_system("linear", 0.0, 0.0),
    lambda: make_system("linear", 0.0, -1.0),
    lambda: make_system("nope"),
    lambda: make_system([1.0, 1.0], 0.0),        # f(0) = 1
    lambda: make_system([-1.0, 0.0, 1.0], -1.0),  # slope -2 at x = -1
])
def test_make_system_rejects(bad):
    with pytest.raises(ValueError):
        bad()


def test_method_kind():
    assert MethodKind.VELOCITY.period_multiplier == 2
    assert MethodKind.STATES.period_multiplier == 3
    assert MethodKind.VELOCITY.active_subinterval == 1
    assert MethodKind("states").active_subinterval == 2


def test_gain_examples():
    assert gain_at("velocity", -4.4, 0.2, 0.1) == 0
    assert gain_at("velocity", -4.4, 0.2, 0.3) == -4.4
    assert gain_at("states", 25.35, 0.2, 0.5) == 25.35
    assert gain_at("states", 25.35, 0.2, 0.3) == 0
    # boundaries open on the right
    assert gain_at("velocity", -1.0, 0.25, 0.25) == -1.0
    assert gain_at("velocity", -1.0, 0.25, 0.5) == 0
    with pytest.raises(ValueError):
        gain_at("velocity", 1.0, 0.2, -0.1)


@given(method=st.sampled_from(list(MethodKind)), i=st.integers(0, 10_000),
       shift=st.integers(0, 50), N=st.integers(16, 512))
def test_schedule_periodic_on_nodes(method, i, shift, N):
    m = method.period_multiplier
    assert is_active_node(m, i, N) == is_active_node(m, i + shift * m * N, N)


@given(method=st.sampled_from(list(MethodKind)), k=st.integers(0, 200),
       frac=st.floats(0.01, 0.99), shift=st.integers(0, 20))
def test_gain_periodic_away_from_edges(method, k, frac, shift):
    tau = 0.25  # exactly representable, so k*tau and period shifts are exact
    m = method.period_multiplier
    t = (k + frac) * tau
    assert gain_at(method, 3.0, tau, t) == gain_at(method, 3.0, tau, t + shift * m * tau)
    assert gain_at(method, 3.0, tau, t) == (3.0 if k % m == m - 1 else 0.0)
