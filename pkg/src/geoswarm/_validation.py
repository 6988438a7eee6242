"""Input validation helpers shared by the public API."""

import numbers

import numpy as np
from sklearn.utils.validation import check_scalar

from .errors import InputError


def check_positive(value, name, *, integer=False, allow_zero=False):
    """Return ``value`` as float (or int) after checking it is > 0 (or >= 0)."""
    target = numbers.Integral if integer else numbers.Real
    if isinstance(value, bool):
        raise InputError(f"{name} must be a number, got bool")
    try:
        check_scalar(
            value,
            name,
            target,
            min_val=0,
            include_boundaries="left" if allow_zero else "neither",
        )
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None
    if not np.isfinite(value):
        raise InputError(f"{name} must be finite, got {value}")
    return int(value) if integer else float(value)


def check_vector(x, name, size=None):
    """Coerce to a finite 1-D float array, optionally of fixed length."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if size is not None and arr.shape[0] != size:
        raise InputError(f"{name} must have length {size}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} must be finite")
    return arr


def check_points(p, name="p"):
    """Coerce to a float array whose trailing axis has length 2."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise InputError(f"{name} must have trailing dimension 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} must be finite")
    return arr


def check_states(s, name="state"):
    """Coerce to a float array whose trailing axis has length 4."""
    arr = np.asarray(s, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 4:
        raise InputError(f"{name} must have trailing dimension 4, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} must be finite")
    return arr
