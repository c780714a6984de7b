"""Adam with bias correction, usable for both descent and ascent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)


def adam_step(state: AdamState, variable, gradient, ascend: bool = False) -> np.ndarray:
    """One Adam update; returns the new variable and advances ``state`` in place.

    With ``ascend`` the gradient is negated, i.e. the objective is maximized.
    """
    variable = np.asarray(variable)
    g = np.asarray(gradient, dtype=variable.dtype)
    if g.shape != variable.shape:
        raise ValueError(f"gradient shape {g.shape} != variable shape {variable.shape}")
    if ascend:
        g = -g
    if state.m is None:
        state.m = np.zeros_like(variable)
        state.v = np.zeros_like(variable)
    elif state.m.shape != variable.shape:
        raise ValueError("Adam state does not match the variable shape")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return variable - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
