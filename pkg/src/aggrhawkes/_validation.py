"""Input checks shared by the estimator API and the CLI."""
from __future__ import annotations

import numpy as np

from .aggregate import AggregatedCounts
from .process import EventPattern


def check_positive(value, name: str) -> float:
    v = float(value)
    if not np.isfinite(v) or v <= 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return v


def check_window(window) -> tuple | None:
    if window is None:
        return None
    w = tuple(float(v) for v in window)
    if len(w) != 4 or not (w[1] > w[0] and w[3] > w[2]):
        raise ValueError(f"window must be (x0, x1, y0, y1) with x1 > x0 and y1 > y0, got {window}")
    return w


def check_observations(X) -> AggregatedCounts | EventPattern:
    """Accept binned counts or an exact pattern; anything else is rejected."""
    if isinstance(X, AggregatedCounts):
        return X
    if isinstance(X, EventPattern):
        return X.validate()
    raise TypeError(f"expected AggregatedCounts or EventPattern, got {type(X).__name__}")


def check_pattern(X) -> EventPattern:
    if not isinstance(X, EventPattern):
        raise TypeError(f"expected EventPattern, got {type(X).__name__}")
    return X.validate()
