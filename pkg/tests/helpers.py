"""Shared helpers for the test suite."""

import numpy as np

from splinefit.spline import BSplineSurface


def random_surface(rng, rows=5, cols=6, degrees=(2, 2), z_range=0.25, jitter=0.2):
    """Random heightfield-like surface: jittered xy lattice, uniform z."""
    gx, gy = np.meshgrid(
        np.linspace(0, 1, rows), np.linspace(0, 1, cols), indexing="ij"
    )
    control = np.zeros((rows, cols, 3))
    control[..., 0] = gx + rng.normal(0, jitter / max(rows - 1, 1), (rows, cols))
    control[..., 1] = gy + rng.normal(0, jitter / max(cols - 1, 1), (rows, cols))
    control[..., 2] = rng.uniform(-z_range, z_range, (rows, cols))
    return BSplineSurface.from_grid(control, degrees)
