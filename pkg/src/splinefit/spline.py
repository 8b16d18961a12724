"""B-spline curves and tensor-product surfaces.

Conventions used throughout:

* Knot vectors are open uniform: the first and last ``degree + 1`` knots are
  repeated (0 and 1), interior knots are equally spaced.  The parameter
  domain is always [0, 1] (and [0, 1] x [0, 1] for surfaces).
* A control grid is an ``(n+1, m+1, 3)`` array; axis 0 is the u direction,
  axis 1 the v direction.
* Degree-0 basis functions use half-open spans [t_i, t_{i+1}), except at
  t = 1 which is assigned to the last nonempty span so both surface corners
  interpolate their control points.
* Any 0/0 quotient in the Cox-de Boor recursion is taken to be 0.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateNormalError


def open_uniform_knots(num_cps, degree):
    """Open uniform knot vector for ``num_cps`` control points of ``degree``.

    Returns an array of ``num_cps + degree + 1`` knots: ``degree + 1`` zeros,
    equally spaced interior knots, ``degree + 1`` ones.

    >>> open_uniform_knots(5, 2)
    array([0.        , 0.        , 0.        , 0.33333333, 0.66666667,
           1.        , 1.        , 1.        ])
    """
    if degree < 1:
        raise ConfigurationError(f"degree must be >= 1, got {degree}")
    if num_cps < degree + 1:
        raise ConfigurationError(
            f"need at least degree+1={degree + 1} control points, got {num_cps}"
        )
    interior = np.linspace(0.0, 1.0, num_cps - degree + 1)[1:-1]
    return np.concatenate(
        [np.zeros(degree + 1), interior, np.ones(degree + 1)]
    )


def basis(i, k, t, knots):
    """Cox-de Boor basis function N_{i,k}(t) on the knot vector ``knots``.

    The recursion bottoms out at degree 0 with the half-open indicator of
    [t_i, t_{i+1}); at t = 1 the indicator of the last nonempty span is 1
    instead, so the curve is closed on the right.  0/0 terms are 0.
    """
    T = np.asarray(knots, dtype=float)
    if not (0 <= i <= len(T) - k - 2):
        raise ConfigurationError(
            f"basis index {i} out of range for {len(T)} knots and degree {k}"
        )
    if k == 0:
        if T[i] <= t < T[i + 1]:
            return 1.0
        if t == T[-1] and T[i] < T[i + 1] == T[-1]:
            return 1.0
        return 0.0
    left = 0.0
    den = T[i + k] - T[i]
    if den > 0.0:
        left = (t - T[i]) / den * basis(i, k - 1, t, T)
    right = 0.0
    den = T[i + k + 1] - T[i + 1]
    if den > 0.0:
        right = (T[i + k + 1] - t) / den * basis(i + 1, k - 1, t, T)
    return left + right


def basis_matrix(knots, degree, ts):
    """All basis functions of ``degree`` evaluated at parameters ``ts``.

    Returns an ``(len(ts), num_cps)`` matrix whose column i is N_{i,degree}.
    Iterative form of the same recursion as :func:`basis`; the two agree to
    machine precision.
    """
    T = np.asarray(knots, dtype=float)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    nspans = len(T) - 1
    N = np.zeros((len(ts), nspans))
    for i in range(nspans):
        if T[i] < T[i + 1]:
            N[:, i] = (T[i] <= ts) & (ts < T[i + 1])
            if T[i + 1] == T[-1]:
                N[ts == T[-1], i] = 1.0
    for k in range(1, degree + 1):
        Nk = np.zeros((len(ts), nspans - k))
        for i in range(nspans - k):
            den = T[i + k] - T[i]
            if den > 0.0:
                Nk[:, i] += (ts - T[i]) / den * N[:, i]
            den = T[i + k + 1] - T[i + 1]
            if den > 0.0:
                Nk[:, i] += (T[i + k + 1] - ts) / den * N[:, i + 1]
        N = Nk
    return N


@dataclass
class BSplineSurface:
    """Tensor-product B-spline surface.

    Attributes
    ----------
    degree_u, degree_v : int
        Polynomial degrees in the two parametric directions.
    knots_u, knots_v : ndarray
        Open uniform knot vectors consistent with the control grid.
    control : ndarray, shape (n+1, m+1, 3)
        Control points; axis 0 follows u, axis 1 follows v.
    """

    degree_u: int
    degree_v: int
    knots_u: np.ndarray
    knots_v: np.ndarray
    control: np.ndarray

    def __post_init__(self):
        self.control = np.asarray(self.control, dtype=float)
        if self.control.ndim != 3 or self.control.shape[2] != 3:
            raise ConfigurationError(
                f"control grid must be (rows, cols, 3), got {self.control.shape}"
            )
        rows, cols, _ = self.control.shape
        if rows < self.degree_u + 1 or cols < self.degree_v + 1:
            raise ConfigurationError(
                f"{rows}x{cols} control grid too small for degrees "
                f"({self.degree_u}, {self.degree_v})"
            )
        self.knots_u = np.asarray(self.knots_u, dtype=float)
        self.knots_v = np.asarray(self.knots_v, dtype=float)
        if len(self.knots_u) != rows + self.degree_u + 1:
            raise ConfigurationError("knots_u length inconsistent with control rows")
        if len(self.knots_v) != cols + self.degree_v + 1:
            raise ConfigurationError("knots_v length inconsistent with control cols")
        if np.any(np.diff(self.knots_u) < 0) or np.any(np.diff(self.knots_v) < 0):
            raise ConfigurationError("knot vectors must be non-decreasing")

    @classmethod
    def from_grid(cls, control, degrees=(2, 2)):
        """Build a surface over ``control`` with open uniform knots."""
        control = np.asarray(control, dtype=float)
        p, q = degrees
        return cls(
            degree_u=p,
            degree_v=q,
            knots_u=open_uniform_knots(control.shape[0], p),
            knots_v=open_uniform_knots(control.shape[1], q),
            control=control,
        )

    @property
    def grid_shape(self):
        return self.control.shape[:2]


def eval_surface(surface, u, v):
    """Evaluate S(u, v) as the full double sum over all control points."""
    return eval_surface_many(surface, [u], [v])[0]


def eval_surface_many(surface, us, vs):
    """Evaluate the surface at paired parameter arrays; returns (M, 3)."""
    Bu = basis_matrix(surface.knots_u, surface.degree_u, us)
    Bv = basis_matrix(surface.knots_v, surface.degree_v, vs)
    return np.einsum("ai,ijc,aj->ac", Bu, surface.control, Bv)


def eval_surface_grid(surface, us, vs):
    """Evaluate on the lattice us x vs; returns (len(us), len(vs), 3)."""
    Bu = basis_matrix(surface.knots_u, surface.degree_u, us)
    Bv = basis_matrix(surface.knots_v, surface.degree_v, vs)
    return np.einsum("ai,ijc,bj->abc", Bu, surface.control, Bv)


def sample_surface(surface, count, mode="random", seed=0):
    """Sample points on the surface.

    ``mode="uniform-grid"`` evaluates a ceil(sqrt(count))^2 regular parameter
    lattice; ``mode="random"`` draws ``count`` (u, v) pairs i.i.d. uniform on
    the unit square from ``seed``.

    Returns
    -------
    points : ndarray, shape (M, 3)
    params : ndarray, shape (M, 2)
        The (u, v) parameter of every returned point, so callers can
        re-evaluate exact (noise-free) positions later.
    """
    if count < 1:
        raise ConfigurationError(f"count must be >= 1, got {count}")
    if mode == "uniform-grid":
        side = int(np.ceil(np.sqrt(count)))
        g = np.linspace(0.0, 1.0, side) if side > 1 else np.array([0.0])
        uu, vv = np.meshgrid(g, g, indexing="ij")
        params = np.column_stack([uu.ravel(), vv.ravel()])
    elif mode == "random":
        rng = np.random.default_rng(seed)
        params = rng.random((count, 2))
    else:
        raise ConfigurationError(f"unknown sampling mode {mode!r}")
    return eval_surface_many(surface, params[:, 0], params[:, 1]), params


def surface_normal(surface, u, v, h=1e-5):
    """Unit surface normal from finite-difference tangents.

    Central differences with step ``h``, clamped to the [0, 1] domain (the
    difference becomes one-sided at the boundary).  Raises
    :class:`DegenerateNormalError` when the tangents are parallel.
    """
    if not (0.0 < h <= 1e-3):
        raise ConfigurationError(f"step h must be in (0, 1e-3], got {h}")
    u0, u1 = max(0.0, u - h), min(1.0, u + h)
    v0, v1 = max(0.0, v - h), min(1.0, v + h)
    pts = eval_surface_many(surface, [u1, u0, u, u], [v, v, v1, v0])
    du = (pts[0] - pts[1]) / (u1 - u0)
    dv = (pts[2] - pts[3]) / (v1 - v0)
    n = np.cross(du, dv)
    norm = np.linalg.norm(n)
    if norm < 1e-12:
        raise DegenerateNormalError(
            f"degenerate tangents at (u, v) = ({u}, {v}); |du x dv| = {norm:.3e}"
        )
    return n / norm
