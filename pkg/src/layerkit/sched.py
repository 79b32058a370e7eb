"""Learning-rate / momentum policies evaluated at a training-progress fraction.

``poly`` decays the rate from ``base_lr`` to zero as ``(1 - f) ** power``;
``power=1`` gives a straight line, ``power=0.9`` the usual "poly" variant.
``onecycle`` warms up from ``base_lr / start_div`` to ``base_lr`` over the
first ``warmup_fraction`` of training, then anneals to ``base_lr / final_div``,
while momentum moves the opposite way between ``m_high`` and ``m_low``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

POLICIES = ("poly", "onecycle")


@dataclass(frozen=True)
class SchedulePoint:
    step: int
    fraction: float
    learning_rate: float
    momentum: float


def _check_fraction(fraction):
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction {fraction} outside [0, 1]")


def poly(fraction, base_lr=0.01, power=1.0, momentum=0.9):
    _check_fraction(fraction)
    if base_lr <= 0 or power <= 0:
        raise ValueError("base_lr and power must be positive")
    return base_lr * (1.0 - fraction) ** power, momentum


def _interp(start, end, t, shape):
    if shape == "linear":
        return start * (1.0 - t) + end * t
    if shape == "cosine":
        return end + (start - end) * (1.0 + math.cos(math.pi * t)) / 2.0
    raise ValueError(f"unknown shape {shape!r}")


def onecycle(fraction, base_lr=0.01, warmup_fraction=0.3, start_div=10.0, final_div=4.0,
             m_high=0.9, m_low=0.8, shape="linear"):
    _check_fraction(fraction)
    if not 0.0 < warmup_fraction < 1.0:
        raise ValueError("warmup_fraction must lie strictly inside (0, 1)")
    if base_lr <= 0 or start_div <= 0 or final_div <= 0:
        raise ValueError("base_lr and divisors must be positive")
    if fraction <= warmup_fraction:
        t = fraction / warmup_fraction
        return (_interp(base_lr / start_div, base_lr, t, shape),
                _interp(m_high, m_low, t, shape))
    t = (fraction - warmup_fraction) / (1.0 - warmup_fraction)
    return (_interp(base_lr, base_lr / final_div, t, shape),
            _interp(m_low, m_high, t, shape))


def policy(name):
    try:
        return {"poly": poly, "onecycle": onecycle}[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; expected one of {POLICIES}") from None


def step_fraction(step, total_steps):
    return step / (total_steps - 1) if total_steps > 1 else 0.0


def tabulate(name, total_steps, **params) -> list[SchedulePoint]:
    """Evaluate a policy at ``step / (total_steps - 1)`` for every step."""
    if total_steps < 2:
        raise ValueError("need at least two steps")
    fn = policy(name)
    out = []
    for step in range(total_steps):
        f = step_fraction(step, total_steps)
        lr, mom = fn(f, **params)
        out.append(SchedulePoint(step, f, lr, mom))
    return out
