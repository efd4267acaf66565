"""Link functions mapping real parameters to observation probabilities."""
from __future__ import annotations

import numpy as np

__all__ = ["LOGISTIC", "LinkFunction", "LogisticLink"]

# Probabilities are kept this far from {0, 1} in the generic log/ratio paths
# so losses stay finite for finite arguments.
_P_EPS = 1e-300


class LinkFunction:
    """Differentiable map from the real line into (0, 1).

    Subclasses provide ``f`` (the link) and ``df`` (its derivative).  The
    Bernoulli loss helpers have generic implementations; links with a stabler
    closed form (see :class:`LogisticLink`) override them.
    """

    name = "link"

    def f(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def df(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def loss(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Entrywise negative Bernoulli log-likelihood of label ``y`` at ``x``."""
        p = np.clip(self.f(x), _P_EPS, 1.0 - _P_EPS)
        return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))

    def loss_grad(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Entrywise derivative of :meth:`loss` with respect to ``x``."""
        p = np.clip(self.f(x), _P_EPS, 1.0 - _P_EPS)
        return self.df(x) * ((1.0 - y) / (1.0 - p) - y / p)


class LogisticLink(LinkFunction):
    """sigma(x) = 1 / (1 + exp(-x)), evaluated without overflow."""

    name = "logistic"

    def f(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out

    def df(self, x):
        p = self.f(x)
        return p * (1.0 - p)

    def loss(self, x, y):
        # -[y log(sigma) + (1-y) log(1-sigma)] = logaddexp(0, x) - y*x
        x = np.asarray(x, dtype=np.float64)
        return np.logaddexp(0.0, x) - np.asarray(y, dtype=np.float64) * x

    def loss_grad(self, x, y):
        return self.f(x) - np.asarray(y, dtype=np.float64)


LOGISTIC = LogisticLink()
