"""Built-in example models."""

from __future__ import annotations

import numpy as np

from .core import Model, ThetaPolynomial

TOY_STATES = ("0", "x", "y", "z", "dead")


def toy_model(r: float, rate: float = 1.0) -> Model:
    """Five-state "learning" process on ``{0, x, y, z, dead}``.

    ``x`` decays to ``0`` at rate ``rate``, ``y`` never moves, ``z`` decays
    and lands on ``0`` or ``dead`` with equal probability. ``obs`` is 1 on
    ``0``, 0 on ``dead`` and ``r`` on the three learning states.
    """
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must lie in (0, 1), got {r}")
    one = ThetaPolynomial((1.0,))
    theta = ThetaPolynomial((0.0, 1.0))
    kernel = (
        ((0, one),),
        ((0, ThetaPolynomial((1.0, -1.0))), (1, theta)),
        ((2, one),),
        ((0, ThetaPolynomial((0.5, -0.5))), (4, ThetaPolynomial((0.5, -0.5))), (3, theta)),
        ((4, one),),
    )
    return Model(TOY_STATES, np.array([1.0, r, r, r, 0.0]), rate, kernel)


def toy_closed_form(r: float) -> dict[tuple[str, str], float]:
    """Known closed-form distances for the toy model with discount ``exp(-rate)``.

    The pair ``(x, z)`` is only known to lie in ``[1/8, 1/4]`` and is omitted.
    """
    return {
        ("0", "dead"): 1.0,
        ("0", "x"): 1.0 - r,
        ("0", "y"): 1.0 - r,
        ("x", "y"): (1.0 - r) / 2.0,
        ("y", "z"): 0.25,
        ("y", "dead"): r,
        ("x", "dead"): max(r, 0.5),
        ("z", "dead"): max(r, 0.25),
        ("0", "z"): 0.25 if r >= 0.75 else 1.0 - r,
    }


def constant_obs_model(n: int = 3, value: float = 0.5, rate: float = 1.0) -> Model:
    """Cyclic decay chain i -> i+1 with the same observable everywhere."""
    kernel = []
    for i in range(n):
        j = (i + 1) % n
        if j == i:
            kernel.append(((i, ThetaPolynomial((1.0,))),))
        else:
            kernel.append(((j, ThetaPolynomial((1.0, -1.0))), (i, ThetaPolynomial((0.0, 1.0)))))
    return Model(tuple(f"s{i}" for i in range(n)), np.full(n, value), rate, tuple(kernel))
