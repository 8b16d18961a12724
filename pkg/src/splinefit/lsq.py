"""Classical least-squares B-spline surface approximation.

Unordered clouds are first forced onto a complete r x c grid by rank
binning (sort by y into equal-count bands, sort each band by x, resample to
c evenly spaced ranks), then a fixed-size control grid is fit by solving the
tensor-product normal equations at chord-length parameters.

This is the fixed-grid baseline: the control-point count is a user choice,
so an ill-chosen grid under- or over-fits by construction.
"""

from dataclasses import dataclass

import numpy as np

from .clouds import as_cloud
from .errors import (
    ConfigurationError,
    DegenerateParameterizationError,
    InsufficientPointsError,
    SingularSystemError,
)
from .spline import BSplineSurface, basis_matrix, open_uniform_knots


@dataclass
class FitConfig:
    """Fixed fitting choices: degrees, control-grid size, Tikhonov weight."""

    degrees: tuple = (2, 2)
    cp_grid: tuple = (5, 6)
    regularization: float = 1e-9

    def __post_init__(self):
        p, q = self.degrees
        rows, cols = self.cp_grid
        if rows <= p or cols <= q:
            raise ConfigurationError(
                f"cp_grid {rows}x{cols} too small for degrees ({p}, {q})"
            )
        if self.regularization < 0:
            raise ConfigurationError("regularization must be >= 0")


def grid_order(cloud, r, c):
    """Order an unordered cloud into an (r, c, 3) grid.

    Row index increases with y, column index with x.  Each y band keeps
    exactly c points taken at evenly spaced x ranks, so the result is a
    complete grid regardless of the input distribution.
    """
    cloud = as_cloud(cloud)
    if len(cloud) < r * c:
        raise InsufficientPointsError(
            f"need at least {r * c} points for a {r}x{c} grid, got {len(cloud)}"
        )
    by_y = cloud[np.argsort(cloud[:, 1], kind="stable")]
    bands = np.array_split(by_y, r)
    grid = np.empty((r, c, 3))
    for i, band in enumerate(bands):
        band = band[np.argsort(band[:, 0], kind="stable")]
        ranks = np.round(np.linspace(0, len(band) - 1, c)).astype(int)
        grid[i] = band[ranks]
    return grid


def chord_length_params(grid):
    """Chord-length parameters of a gridded cloud.

    Cumulative chord lengths are computed along every row and column,
    normalized to [0, 1], and averaged across the grid.  Returns
    ``(u_params, v_params)`` of lengths r and c; u follows the row index.
    Raises when the averaged parameters fail to increase strictly.
    """

    def averaged(g):
        seg = np.linalg.norm(np.diff(g, axis=1), axis=2)
        total = seg.sum(axis=1, keepdims=True)
        if np.any(total == 0.0):
            raise DegenerateParameterizationError(
                "a grid line has zero total chord length"
            )
        cum = np.concatenate([np.zeros((g.shape[0], 1)), np.cumsum(seg, axis=1)], axis=1)
        params = (cum / total).mean(axis=0)
        if np.any(np.diff(params) <= 0.0):
            raise DegenerateParameterizationError(
                "averaged chord-length parameters are not strictly increasing"
            )
        return params

    grid = np.asarray(grid, dtype=float)
    return averaged(np.swapaxes(grid, 0, 1)), averaged(grid)


def lsq_fit_surface(grid, cfg, params=None):
    """Least-squares fit of a B-spline surface to a gridded cloud.

    Solves ``min sum ||S(u_a, v_b) - Q_ab||^2`` over the control points via
    the tensor-product normal equations with a Tikhonov term
    ``regularization * I``.  Parameters default to chord length
    (:func:`chord_length_params`); pass ``params=(u, v)`` when the true
    sampling parameters are known.
    """
    grid = np.asarray(grid, dtype=float)
    r, c, _ = grid.shape
    p, q = cfg.degrees
    rows, cols = cfg.cp_grid
    if rows > r or cols > c:
        raise ConfigurationError(
            f"cp_grid {rows}x{cols} exceeds data grid {r}x{c}"
        )
    u_params, v_params = chord_length_params(grid) if params is None else params
    Bu = basis_matrix(open_uniform_knots(rows, p), p, u_params)
    Bv = basis_matrix(open_uniform_knots(cols, q), q, v_params)
    # normal equations Gu P Gv = Bu' Q Bv, solved in the eigenbases of the
    # two small Gram matrices so the Tikhonov term applies to the full
    # Kronecker system
    su, Vu = np.linalg.eigh(Bu.T @ Bu)
    sv, Vv = np.linalg.eigh(Bv.T @ Bv)
    lam = cfg.regularization
    denom = su[:, None] * sv[None, :] + lam
    if lam == 0.0 and denom.min() < 1e-12:
        raise SingularSystemError(
            "normal equations are rank deficient; increase regularization "
            "or supply better-spread data"
        )
    rhs = np.einsum("ai,abc,bj->ijc", Bu, grid, Bv)
    core = np.einsum("ki,klc,lj->ijc", Vu, rhs, Vv) / denom[..., None]
    control = np.einsum("ik,klc,jl->ijc", Vu, core, Vv)
    return BSplineSurface.from_grid(control, cfg.degrees)


def fit_residual_rms(surface, grid, params=None):
    """RMS distance between a fitted surface and grid data at its parameters."""
    grid = np.asarray(grid, dtype=float)
    u_params, v_params = chord_length_params(grid) if params is None else params
    Bu = basis_matrix(surface.knots_u, surface.degree_u, u_params)
    Bv = basis_matrix(surface.knots_v, surface.degree_v, v_params)
    fitted = np.einsum("ai,ijc,bj->abc", Bu, surface.control, Bv)
    return float(np.sqrt(np.mean(np.sum((fitted - grid) ** 2, axis=2))))
