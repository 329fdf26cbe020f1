"""Sample profiles for the ``custom`` scenario, referenced as ``module:function``."""

import numpy as np


def two_plus_cos(x):
    """a(x) = 2 + cos x on the base circle of length 2 pi."""
    x = np.asarray(x, dtype=float)
    return 2.0 + np.cos(x), -np.sin(x), -np.cos(x)


def squashed_sphere(x):
    """a(x) = sin x (1 + 0.2 sin^2 x) on [0, pi]; poles close smoothly."""
    x = np.asarray(x, dtype=float)
    s, c = np.sin(x), np.cos(x)
    a = s + 0.2 * s**3
    a1 = c + 0.6 * s * s * c
    a2 = -s + 0.6 * (2 * s * c * c - s**3)
    return a, a1, a2
