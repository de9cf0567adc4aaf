"""Neuron activation functions.

All non-IO neurons (and the IO neurons of the sensory networks) use a
bounded logistic with an enlarged output range so that targets in [0, 1]
stay off the saturated tails.  Speech IO neurons use a decisive
normalisation (softmax) over the whole IO partition instead.
"""

import numpy as np

# Range / slope constants of the bounded logistic.  The output range is
# (-KAPPA_H, 1 + KAPPA_H).
KAPPA_H = 0.35795
KAPPA_W = 0.92

_SPAN = 1.0 + 2.0 * KAPPA_H


def bounded_sigmoid(x):
    """Logistic stretched to (-KAPPA_H, 1 + KAPPA_H), centred at (0, 0.5)."""
    s = 1.0 / (1.0 + np.exp(-KAPPA_W * np.asarray(x, dtype=np.float64)))
    return _SPAN * s - KAPPA_H


def bounded_sigmoid_deriv(x):
    """Derivative of :func:`bounded_sigmoid` at the pre-activation x."""
    s = 1.0 / (1.0 + np.exp(-KAPPA_W * np.asarray(x, dtype=np.float64)))
    return _SPAN * KAPPA_W * s * (1.0 - s)


def softmax(z):
    """Decisive normalisation of a single pre-activation vector.

    Shifted by the maximum before exponentiation, so arbitrarily large
    inputs normalise without overflow.
    """
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - np.max(z))
    return e / np.sum(e)
