"""Small input-validation helpers used at the public entry points."""

from __future__ import annotations

import numpy as np


def as_float_array(a, name="array", ndim=None, shape=None):
    """Coerce to a float ndarray and check dimensionality/shape.

    Parameters
    ----------
    a : array_like
        Input values.
    name : str
        Name used in error messages.
    ndim : int, optional
        Required number of dimensions.
    shape : tuple, optional
        Required shape; entries set to None are not checked.
    """
    arr = np.asarray(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got ndim={arr.ndim}")
    if shape is not None:
        if len(shape) != arr.ndim:
            raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
        for want, got in zip(shape, arr.shape):
            if want is not None and want != got:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    return arr


def ensure_finite(a, name="array"):
    arr = np.asarray(a)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_positive(value, name):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value


def check_index_array(indices, n, name="indices"):
    """Validate integer indices into a state vector of length n."""
    idx = np.asarray(indices)
    if idx.size and not np.issubdtype(idx.dtype, np.integer):
        raise ValueError(f"{name} must be integers")
    idx = idx.astype(np.intp).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError(f"{name} must lie in [0, {n}), got range "
                         f"[{idx.min()}, {idx.max()}]")
    if len(np.unique(idx)) != len(idx):
        raise ValueError(f"{name} must not repeat")
    return idx
