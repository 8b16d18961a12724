"""Graph-network predictor of padded control-point grids.

The network sees an unordered cloud and emits a fixed I x J x 3 matrix whose
top-left block holds the predicted control points and whose remaining
entries are driven toward zero, so the grid size can be recovered by
thresholding row/column magnitudes.

Architecture: the cloud is centered on its centroid, a k-nearest-neighbor
graph is built once, and several edge-convolution layers compute per-edge
features from ``[x_i, x_j - x_i]`` through a two-layer MLP, aggregated per
node by elementwise max.  All layer outputs are concatenated (skip
connections), max- and mean-pooled into a global feature, refined by
attention over a small dictionary of learned prototype vectors, and mapped
by an MLP head to the padded grid.  The centroid is added back to every
predicted point.

Internally the cloud is put into a canonical (lexicographic) order before
anything else, which makes the whole forward pass exactly permutation
invariant, including floating-point summation order.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .clouds import as_cloud
from .errors import ConfigurationError, EmptyPredictionError, ParseError

RELU_SLOPE = 0.1

CKPT_MAGIC = b"BSCK"
CKPT_VERSION = 1


@dataclass
class ArchConfig:
    k_neighbors: int = 16
    layer_dims: tuple = (64, 64, 128)
    global_dim: int = 256
    dict_atoms: int = 16
    head_hidden: int = 512
    pad_rows: int = 8
    pad_cols: int = 8

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        values = (self.k_neighbors, self.global_dim, self.dict_atoms,
                  self.head_hidden, self.pad_rows, self.pad_cols,
                  *self.layer_dims)
        if not self.layer_dims or any(v < 1 for v in values):
            raise ConfigurationError(f"invalid architecture config {self}")

    @property
    def out_size(self):
        return self.pad_rows * self.pad_cols * 3


@dataclass
class KnnGraph:
    """Symmetrized k-NN adjacency as a CSR edge list sorted by (center, nbr)."""

    indptr: np.ndarray
    indices: np.ndarray

    @property
    def num_nodes(self):
        return len(self.indptr) - 1

    @property
    def num_edges(self):
        return len(self.indices)


def build_knn_graph(cloud, k):
    """Exact k nearest neighbors (ties to the lower index), symmetrized."""
    cloud = as_cloud(cloud)
    n = len(cloud)
    if n <= k:
        raise ConfigurationError(f"need more than k={k} points, got {n}")
    adj = np.zeros((n, n), dtype=bool)
    chunk = max(1, int(2**24 / (n * 3)))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        d2 = ((cloud[lo:hi, None, :] - cloud[None, :, :]) ** 2).sum(axis=2)
        d2[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        adj[np.arange(lo, hi)[:, None], nearest] = True
    sym = adj | adj.T
    ctr, nbr = np.nonzero(sym)
    indptr = np.concatenate([[0], np.cumsum(sym.sum(axis=1))])
    return KnnGraph(indptr=indptr.astype(np.int64), indices=nbr.astype(np.int64))


@dataclass
class PreparedCloud:
    """Canonically ordered cloud with its graph and scatter plans, so the
    expensive preprocessing can be cached across training steps."""

    points: np.ndarray
    centroid: np.ndarray
    graph: KnnGraph
    ctr_idx: np.ndarray = field(repr=False, default=None)
    nbr_idx: np.ndarray = field(repr=False, default=None)
    seg_pad: np.ndarray = field(repr=False, default=None)
    seg_valid: np.ndarray = field(repr=False, default=None)
    plan_ctr: object = field(repr=False, default=None)
    plan_nbr: object = field(repr=False, default=None)


def prepare_cloud(cloud, k):
    cloud = as_cloud(cloud)
    order = np.lexsort((cloud[:, 2], cloud[:, 1], cloud[:, 0]))
    pts = cloud[order]
    graph = build_knn_graph(pts, k)
    counts = np.diff(graph.indptr)
    n = len(pts)
    ctr_idx = np.repeat(np.arange(n), counts)
    seg_pad, seg_valid = ad.build_segments(counts)
    return PreparedCloud(
        points=pts,
        centroid=pts.mean(axis=0),
        graph=graph,
        ctr_idx=ctr_idx,
        nbr_idx=graph.indices,
        seg_pad=seg_pad,
        seg_valid=seg_valid,
        plan_ctr=ad.make_scatter_plan(ctr_idx, n),
        plan_nbr=ad.make_scatter_plan(graph.indices, n),
    )


def param_shapes(arch):
    """Registry of learnable tensors, in canonical order."""
    shapes = {}
    d_in = 3
    for layer, d_out in enumerate(arch.layer_dims):
        shapes[f"conv{layer}.w1"] = (2 * d_in, d_out)
        shapes[f"conv{layer}.b1"] = (d_out,)
        shapes[f"conv{layer}.w2"] = (d_out, d_out)
        shapes[f"conv{layer}.b2"] = (d_out,)
        d_in = d_out
    skip = sum(arch.layer_dims)
    shapes["proj.w"] = (2 * skip, arch.global_dim)
    shapes["proj.b"] = (arch.global_dim,)
    shapes["dict.atoms"] = (arch.dict_atoms, arch.global_dim)
    shapes["head.w1"] = (arch.global_dim, arch.head_hidden)
    shapes["head.b1"] = (arch.head_hidden,)
    shapes["head.w2"] = (arch.head_hidden, arch.out_size)
    shapes["head.b2"] = (arch.out_size,)
    return shapes


def init_params(arch, rng, dtype=np.float32):
    """Glorot-uniform weights, zero biases, N(0, 0.02) dictionary atoms."""
    params = {}
    for name, shape in param_shapes(arch).items():
        if name == "dict.atoms":
            arr = rng.normal(0.0, 0.02, shape)
        elif len(shape) == 1:
            arr = np.zeros(shape)
        else:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            arr = rng.uniform(-bound, bound, shape)
        params[name] = arr.astype(dtype)
    return params


def check_params(params, arch):
    expected = param_shapes(arch)
    got = {name: tuple(arr.shape) for name, arr in params.items()}
    if got != expected:
        raise ConfigurationError(
            f"parameter registry does not match architecture: {got} vs {expected}"
        )


def forward_tape(ptensors, arch, prep):
    """Build the tape from parameter tensors to the flat (1, I*J*3) output."""
    dtype = next(iter(ptensors.values())).data.dtype
    h = ad.tensor((prep.points - prep.centroid).astype(dtype))
    feats = []
    for layer in range(len(arch.layer_dims)):
        d_in = h.shape[1]
        w1 = ptensors[f"conv{layer}.w1"]
        # W1 @ [x_i, x_j - x_i] split into node-level products: cheaper than
        # forming explicit edge features before the first linear map
        part_self = ad.matmul(h, ad.slice_rows(w1, 0, d_in))
        part_diff = ad.matmul(h, ad.slice_rows(w1, d_in, 2 * d_in))
        edge = ad.add3(
            ad.take_rows(ad.sub(part_self, part_diff), prep.ctr_idx, prep.plan_ctr),
            ad.take_rows(part_diff, prep.nbr_idx, prep.plan_nbr),
            ptensors[f"conv{layer}.b1"],
        )
        z = ad.leaky_relu(edge, RELU_SLOPE)
        z = ad.leaky_relu(
            ad.affine(z, ptensors[f"conv{layer}.w2"], ptensors[f"conv{layer}.b2"]),
            RELU_SLOPE,
        )
        h = ad.segment_max(z, prep.seg_pad, prep.ctr_idx)
        feats.append(h)
    skip = ad.concat_cols(feats) if len(feats) > 1 else feats[0]
    pooled = ad.concat_cols([ad.max_rows(skip), ad.mean_rows(skip)])
    g = ad.leaky_relu(
        ad.affine(pooled, ptensors["proj.w"], ptensors["proj.b"]), RELU_SLOPE
    )
    atoms = ptensors["dict.atoms"]
    logits = ad.scale(ad.matmul(g, ad.transpose(atoms)),
                      1.0 / np.sqrt(arch.global_dim))
    refined = ad.add(g, ad.matmul(ad.softmax_rows(logits), atoms))
    hidden = ad.leaky_relu(
        ad.affine(refined, ptensors["head.w1"], ptensors["head.b1"]), RELU_SLOPE
    )
    out = ad.affine(hidden, ptensors["head.w2"], ptensors["head.b2"])
    pad_centroid = np.tile(prep.centroid, arch.pad_rows * arch.pad_cols)
    return ad.add_const(out, pad_centroid[None, :])


def forward(params, arch, cloud, prep=None):
    """Predict the padded (I, J, 3) control-point matrix for one cloud."""
    check_params(params, arch)
    if prep is None:
        prep = prepare_cloud(cloud, arch.k_neighbors)
    ptensors = {name: ad.tensor(arr) for name, arr in params.items()}
    out = forward_tape(ptensors, arch, prep)
    return out.data.reshape(arch.pad_rows, arch.pad_cols, 3).astype(float)


def dictionary_refine(global_feat, atoms):
    """Residual attention of a feature vector over dictionary atoms.

    ``a = softmax(g . atoms^T / sqrt(d))``; returns ``g + a^T atoms``.
    """
    g = np.asarray(global_feat, dtype=float)
    atoms = np.asarray(atoms, dtype=float)
    if g.shape[-1] != atoms.shape[1]:
        raise ConfigurationError(
            f"feature dim {g.shape[-1]} != atom dim {atoms.shape[1]}"
        )
    logits = g @ atoms.T / np.sqrt(atoms.shape[1])
    e = np.exp(logits - logits.max())
    attn = e / e.sum()
    return g + attn @ atoms


def _leading_run(active):
    hits = np.flatnonzero(~active)
    return int(hits[0]) if len(hits) else len(active)


def extract_cp_grid(pred, epsilon=0.05):
    """Recover the variable-size control grid from a padded prediction.

    A row (column) is active when the mean norm of its J (I) entries exceeds
    ``epsilon``; the grid is the leading contiguous block of active rows and
    columns, so a stray active row beyond an inactive one is ignored.
    """
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    pred = np.asarray(pred, dtype=float)
    norms = np.linalg.norm(pred, axis=2)
    rows = _leading_run(norms.mean(axis=1) > epsilon)
    cols = _leading_run(norms.mean(axis=0) > epsilon)
    if rows == 0 or cols == 0:
        raise EmptyPredictionError(
            f"no active rows/cols above epsilon={epsilon}"
        )
    return pred[:rows, :cols].copy(), (rows, cols)


def _arch_vector(arch):
    return np.array(
        [arch.k_neighbors, arch.global_dim, arch.dict_atoms, arch.head_hidden,
         arch.pad_rows, arch.pad_cols, len(arch.layer_dims), *arch.layer_dims],
        dtype=np.float32,
    )


def _arch_from_vector(vec):
    nums = [int(round(float(x))) for x in vec]
    n_layers = nums[6]
    return ArchConfig(
        k_neighbors=nums[0], global_dim=nums[1], dict_atoms=nums[2],
        head_hidden=nums[3], pad_rows=nums[4], pad_cols=nums[5],
        layer_dims=tuple(nums[7:7 + n_layers]),
    )


def save_checkpoint(path, params, arch, degrees=(2, 2)):
    """Binary checkpoint: architecture, surface degrees, and all tensors.

    Layout: magic ``BSCK``, u32 version, u32 tensor count, then per tensor
    u16 name length, UTF-8 name, u8 rank, u32 dims, little-endian f32 data.
    The architecture and spline degrees ride along as metadata tensors.
    """
    entries = [("__arch__", _arch_vector(arch)),
               ("__degrees__", np.asarray(degrees, dtype=np.float32))]
    entries += list(params.items())
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<II", CKPT_VERSION, len(entries)))
        for name, arr in entries:
            arr = np.ascontiguousarray(arr, dtype="<f4")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (params, ArchConfig, degrees)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CKPT_MAGIC:
        raise ParseError(f"{path}: not a BSCK checkpoint")
    version, count = struct.unpack_from("<II", data, 4)
    if version != CKPT_VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<B", data, off)
        off += 1
        dims = struct.unpack_from(f"<{rank}I", data, off)
        off += 4 * rank
        size = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(data, dtype="<f4", count=size, offset=off)
        off += 4 * size
        tensors[name] = arr.reshape(dims).copy()
    try:
        arch = _arch_from_vector(tensors.pop("__arch__"))
        degrees = tuple(int(round(float(x))) for x in tensors.pop("__degrees__"))
    except KeyError as exc:
        raise ParseError(f"{path}: missing metadata tensor {exc}") from exc
    check_params(tensors, arch)
    return tensors, arch, degrees
