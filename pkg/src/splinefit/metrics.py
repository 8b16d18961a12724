"""Point-cloud similarity metrics: EMD, density-aware Chamfer, normal
consistency, plus the nearest-neighbor and PCA-normal machinery they need.

All metrics are "lower is better".  EMD solves the balanced assignment
problem exactly (after optional subsampling); DCD is the bounded Chamfer
variant that discounts repeated nearest-neighbor hits through an
exponential of squared distance.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .clouds import as_cloud
from .errors import DegenerateNeighborhoodError

BRUTE_FORCE_BELOW = 64


def nearest_neighbors(query, reference, k=1):
    """Exact k nearest reference points for every query point.

    Uses a k-d tree for larger clouds and a brute-force scan below
    :data:`BRUTE_FORCE_BELOW` points; both are exact.
    Returns ``(distances, indices)`` shaped (len(query), k), squeezed when
    k = 1.
    """
    query = as_cloud(query)
    reference = as_cloud(reference)
    if len(reference) < BRUTE_FORCE_BELOW:
        d = cdist(query, reference)
        idx = np.argsort(d, axis=1, kind="stable")[:, :k]
        dist = np.take_along_axis(d, idx, axis=1)
    else:
        dist, idx = cKDTree(reference).query(query, k=k)
        dist = dist.reshape(len(query), k)
        idx = idx.reshape(len(query), k)
    if k == 1:
        return dist[:, 0], idx[:, 0]
    return dist, idx


@dataclass
class Assignment:
    """Optimal bijection between two equal-size clouds."""

    mapping: np.ndarray
    total_cost: float


def optimal_assignment(a, b):
    """Exact minimum-cost perfect matching under Euclidean distance."""
    d = cdist(as_cloud(a), as_cloud(b))
    rows, cols = linear_sum_assignment(d)
    mapping = np.empty(len(a), dtype=int)
    mapping[rows] = cols
    return Assignment(mapping=mapping, total_cost=float(d[rows, cols].sum()))


def emd(a, b, eval_size=1024, seed=0):
    """Earth mover's distance: mean matched distance under the optimal
    bijection.

    Clouds larger than ``eval_size`` are first subsampled uniformly without
    replacement (both draws from one stream seeded by ``seed``) to
    ``min(eval_size, |a|, |b|)`` points; the assignment itself is exact.
    """
    a = as_cloud(a)
    b = as_cloud(b)
    m = min(eval_size, len(a), len(b))
    rng = np.random.default_rng(seed)
    if len(a) > m:
        a = a[rng.choice(len(a), m, replace=False)]
    if len(b) > m:
        b = b[rng.choice(len(b), m, replace=False)]
    assignment = optimal_assignment(a, b)
    return assignment.total_cost / m


def chamfer(a, b):
    """Symmetric mean of squared nearest-neighbor distances."""
    a = as_cloud(a)
    b = as_cloud(b)
    d_ab, _ = nearest_neighbors(a, b)
    d_ba, _ = nearest_neighbors(b, a)
    return float(((d_ab**2).mean() + (d_ba**2).mean()) / 2.0)


def dcd(a, b, alpha=40.0):
    """Density-aware Chamfer distance in [0, 1].

    Each point's exponential affinity to its nearest neighbor is discounted
    by how many points selected that same neighbor, which penalizes clumped
    matchings that plain Chamfer ignores.
    """
    a = as_cloud(a)
    b = as_cloud(b)

    def direction(src, dst):
        dist, idx = nearest_neighbors(src, dst)
        hits = np.bincount(idx, minlength=len(dst))
        return float(np.mean(np.exp(-alpha * dist**2) / hits[idx]))

    value = 1.0 - 0.5 * (direction(a, b) + direction(b, a))
    return float(np.clip(value, 0.0, 1.0))


def pca_normals(cloud, k=16):
    """Per-point unit normals from local PCA.

    Each point's normal is the smallest-eigenvalue eigenvector of the
    covariance of its k nearest neighbors (the point included).  Signs are
    arbitrary; consumers must use absolute dot products.
    """
    cloud = as_cloud(cloud)
    if not 3 <= k < len(cloud):
        raise DegenerateNeighborhoodError(
            f"need |cloud| > k >= 3, got k={k} for {len(cloud)} points"
        )
    _, idx = nearest_neighbors(cloud, cloud, k=k + 1)
    hoods = cloud[idx]  # (n, k+1, 3); column 0 is the point itself
    centered = hoods - hoods.mean(axis=1, keepdims=True)
    cov = np.einsum("nka,nkb->nab", centered, centered) / (k + 1)
    scale = np.trace(cov, axis1=1, axis2=2)
    if np.any(scale < 1e-24):
        raise DegenerateNeighborhoodError(
            "a neighborhood has no spatial extent; normals undefined"
        )
    _, vecs = np.linalg.eigh(cov)
    return vecs[:, :, 0]


def nc_error(a, normals_a, b, normals_b):
    """Normal-consistency error: symmetrized mean of 1 - |n_x . n_y(x)|.

    ``1`` means orthogonal normals everywhere, ``0`` perfectly aligned.
    """
    a = as_cloud(a)
    b = as_cloud(b)

    def direction(src, n_src, dst, n_dst):
        _, idx = nearest_neighbors(src, dst)
        return float(np.mean(1.0 - np.abs(np.sum(n_src * n_dst[idx], axis=1))))

    return 0.5 * (direction(a, normals_a, b, normals_b)
                  + direction(b, normals_b, a, normals_a))


@dataclass
class MetricsReport:
    """Per-sample and mean metric values for one method."""

    method: str
    sample_ids: list
    emd_values: list
    nc_values: list
    dcd_values: list

    @property
    def mean_emd(self):
        return float(np.mean(self.emd_values))

    @property
    def mean_nc(self):
        return float(np.mean(self.nc_values))

    @property
    def mean_dcd(self):
        return float(np.mean(self.dcd_values))

    def write_csv(self, path):
        """Natural-scale CSV: one row per sample plus a mean summary row."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("sample_id,emd,nc,dcd\n")
            for sid, e, n, d in zip(
                self.sample_ids, self.emd_values, self.nc_values, self.dcd_values
            ):
                fh.write(f"{sid},{e:.9g},{n:.9g},{d:.9g}\n")
            fh.write(
                f"mean,{self.mean_emd:.9g},{self.mean_nc:.9g},{self.mean_dcd:.9g}\n"
            )
