"""Synthetic training data: noisy samples of random B-spline surfaces.

Every sample starts from a jittered xy lattice of control points with random
z, gets sampled at random surface parameters, perturbed with per-point
Gaussian noise, thinned, and shuffled.  The supervision target is the control
grid embedded in a fixed I x J x 3 matrix, zero-padded, with a binary mask
marking the real entries.

Datasets live in a directory of ``sample_<id>.bsd`` files (binary, see
:func:`write_sample`) plus a ``manifest.txt`` key=value file recording the
generating configuration and per-size counts.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ParseError
from .kv import read_kv, write_kv
from .spline import BSplineSurface, eval_surface_many

BSD_MAGIC = b"BSDS"
BSD_VERSION = 1


@dataclass
class GenConfig:
    """Knobs for dataset generation.

    ``cp_xy_jitter_sigma`` is a fraction of the control-lattice spacing;
    ``point_noise_sigma`` is in model units (the lattice spans the unit
    square).  ``pad_rows``/``pad_cols`` are the fixed target dimensions I, J.
    """

    grid_sizes: tuple = ((3, 4), (5, 6))
    samples_per_size: int = 300
    cp_xy_jitter_sigma: float = 0.2
    z_range: tuple = (-0.25, 0.25)
    degrees: tuple = (2, 2)
    points_per_cloud: int = 1024
    point_noise_sigma: float = 0.04
    removal_fraction: float = 0.1
    pad_rows: int = 8
    pad_cols: int = 8
    seed: int = 0

    def __post_init__(self):
        p, q = self.degrees
        for rows, cols in self.grid_sizes:
            if rows > self.pad_rows or cols > self.pad_cols:
                raise ConfigurationError(
                    f"grid size {rows}x{cols} exceeds padding "
                    f"{self.pad_rows}x{self.pad_cols}"
                )
            if rows <= p or cols <= q:
                raise ConfigurationError(
                    f"grid size {rows}x{cols} too small for degrees ({p}, {q})"
                )
        if not 0.0 <= self.removal_fraction <= 0.5:
            raise ConfigurationError("removal_fraction must be in [0, 0.5]")
        if self.cp_xy_jitter_sigma < 0 or self.point_noise_sigma < 0:
            raise ConfigurationError("noise sigmas must be >= 0")
        if self.z_range[0] > self.z_range[1]:
            raise ConfigurationError("z_range must be (low, high)")
        if self.points_per_cloud < 1 or self.samples_per_size < 1:
            raise ConfigurationError("counts must be positive")

    @property
    def total_samples(self):
        return len(self.grid_sizes) * self.samples_per_size


def desk_scale(seed=0):
    """Small two-size dataset: trains in minutes on a laptop CPU."""
    return GenConfig(grid_sizes=((3, 4), (5, 6)), samples_per_size=300, seed=seed)


def full_scale(seed=0, three_sizes=False):
    """Full-size dataset: 3000 samples per grid size."""
    sizes = ((3, 4), (5, 6), (3, 6)) if three_sizes else ((3, 4), (5, 6))
    return GenConfig(grid_sizes=sizes, samples_per_size=3000, seed=seed)


@dataclass
class PaddedTarget:
    """I x J x 3 control-point matrix, zero outside the mask block."""

    values: np.ndarray
    mask: np.ndarray

    def crop(self):
        """Return the (rows, cols, 3) block marked by the mask."""
        rows, cols = block_shape(self.mask)
        return self.values[:rows, :cols].copy()


def block_shape(mask):
    """(rows, cols) of the contiguous top-left block of ones in ``mask``."""
    rows = int(np.argmin(mask[:, 0])) if not mask[:, 0].all() else mask.shape[0]
    cols = int(np.argmin(mask[0, :])) if not mask[0, :].all() else mask.shape[1]
    return rows, cols


@dataclass
class DatasetSample:
    """One training/evaluation instance.

    ``cloud`` is the noisy, thinned, shuffled input; ``clean_cloud`` holds the
    same points evaluated at the same surface parameters without noise (kept
    for metric evaluation).  ``params`` retains the (u, v) of every cloud
    point so noise-free configurations can be verified exactly; it is not
    serialized.
    """

    cloud: np.ndarray
    target: PaddedTarget
    true_grid: tuple
    clean_cloud: np.ndarray
    sample_id: int
    params: np.ndarray = field(default=None, repr=False)


def gen_control_grid(rows, cols, cfg, rng):
    """Jittered uniform lattice over the unit square with uniform random z."""
    gx, gy = np.meshgrid(
        np.linspace(0.0, 1.0, rows), np.linspace(0.0, 1.0, cols), indexing="ij"
    )
    sx = 1.0 / (rows - 1)
    sy = 1.0 / (cols - 1)
    grid = np.zeros((rows, cols, 3))
    grid[..., 0] = gx + rng.normal(0.0, cfg.cp_xy_jitter_sigma * sx, (rows, cols))
    grid[..., 1] = gy + rng.normal(0.0, cfg.cp_xy_jitter_sigma * sy, (rows, cols))
    grid[..., 2] = rng.uniform(cfg.z_range[0], cfg.z_range[1], (rows, cols))
    return grid


def pad_target(grid, pad_rows, pad_cols):
    """Embed ``grid`` in a zero (pad_rows, pad_cols, 3) matrix, top-left."""
    rows, cols, _ = grid.shape
    if rows > pad_rows or cols > pad_cols:
        raise ConfigurationError(
            f"{rows}x{cols} grid does not fit in {pad_rows}x{pad_cols} padding"
        )
    values = np.zeros((pad_rows, pad_cols, 3))
    values[:rows, :cols] = grid
    mask = np.zeros((pad_rows, pad_cols), dtype=np.uint8)
    mask[:rows, :cols] = 1
    return PaddedTarget(values=values, mask=mask)


def make_sample(rows, cols, cfg, rng, sample_id=0):
    """Generate one noisy cloud with its padded ground-truth control grid."""
    grid = gen_control_grid(rows, cols, cfg, rng)
    surface = BSplineSurface.from_grid(grid, cfg.degrees)
    n = cfg.points_per_cloud
    params = rng.random((n, 2))
    clean = eval_surface_many(surface, params[:, 0], params[:, 1])
    noisy = clean + rng.normal(0.0, cfg.point_noise_sigma, (n, 3))
    # one permutation both removes floor(f*N) points and shuffles the rest
    keep = rng.permutation(n)[: n - int(cfg.removal_fraction * n)]
    return DatasetSample(
        cloud=noisy[keep],
        target=pad_target(grid, cfg.pad_rows, cfg.pad_cols),
        true_grid=(rows, cols),
        clean_cloud=clean[keep],
        sample_id=sample_id,
        params=params[keep],
    )


def sample_rng(seed, sample_id):
    """Independent per-sample stream; order of generation never matters."""
    return np.random.default_rng(np.random.SeedSequence([seed, sample_id]))


def generate_dataset(cfg, out_dir):
    """Write ``samples_per_size`` samples per grid size plus a manifest.

    Sample ids run 0..N-1 grouped by grid size; each sample draws from its
    own seed stream so generation is reproducible and order independent.
    Returns the directory path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sample_id = 0
    for rows, cols in cfg.grid_sizes:
        for _ in range(cfg.samples_per_size):
            sample = make_sample(
                rows, cols, cfg, sample_rng(cfg.seed, sample_id), sample_id
            )
            write_sample(out / f"sample_{sample_id}.bsd", sample, cfg)
            sample_id += 1
    write_manifest(out / "manifest.txt", cfg)
    return out


def _fmt(value):
    if isinstance(value, (tuple, list)):
        return ",".join(_fmt(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def write_manifest(path, cfg):
    pairs = [
        ("format_version", "1"),
        ("grid_sizes", ",".join(f"{r}x{c}" for r, c in cfg.grid_sizes)),
        ("samples_per_size", str(cfg.samples_per_size)),
        ("cp_xy_jitter_sigma", _fmt(cfg.cp_xy_jitter_sigma)),
        ("z_range", _fmt(cfg.z_range)),
        ("degrees", _fmt(cfg.degrees)),
        ("points_per_cloud", str(cfg.points_per_cloud)),
        ("point_noise_sigma", _fmt(cfg.point_noise_sigma)),
        ("removal_fraction", _fmt(cfg.removal_fraction)),
        ("pad_rows", str(cfg.pad_rows)),
        ("pad_cols", str(cfg.pad_cols)),
        ("seed", str(cfg.seed)),
    ]
    pairs += [
        (f"count_{r}x{c}", str(cfg.samples_per_size)) for r, c in cfg.grid_sizes
    ]
    write_kv(path, pairs)


def parse_grid_sizes(text):
    sizes = []
    for part in text.split(","):
        r, _, c = part.partition("x")
        sizes.append((int(r), int(c)))
    return tuple(sizes)


def read_manifest(path):
    """Parse a manifest back into (GenConfig, per-size counts dict)."""
    kv = read_kv(path)
    if kv.get("format_version") != "1":
        raise ParseError(f"unsupported manifest format_version {kv.get('format_version')!r}")
    cfg = GenConfig(
        grid_sizes=parse_grid_sizes(kv["grid_sizes"]),
        samples_per_size=int(kv["samples_per_size"]),
        cp_xy_jitter_sigma=float(kv["cp_xy_jitter_sigma"]),
        z_range=tuple(float(x) for x in kv["z_range"].split(",")),
        degrees=tuple(int(x) for x in kv["degrees"].split(",")),
        points_per_cloud=int(kv["points_per_cloud"]),
        point_noise_sigma=float(kv["point_noise_sigma"]),
        removal_fraction=float(kv["removal_fraction"]),
        pad_rows=int(kv["pad_rows"]),
        pad_cols=int(kv["pad_cols"]),
        seed=int(kv["seed"]),
    )
    counts = {
        key[len("count_"):]: int(val)
        for key, val in kv.items()
        if key.startswith("count_")
    }
    return cfg, counts


def write_sample(path, sample, cfg):
    """Serialize one sample (little-endian, float32 payload).

    Layout: magic ``BSDS``, u32 version, u32 N, u32 I, u32 J, u16 rows,
    u16 cols, then N*3 f32 noisy points, N*3 f32 clean points, I*J*3 f32
    target values, I*J u8 mask.
    """
    n = len(sample.cloud)
    rows, cols = sample.true_grid
    with open(path, "wb") as fh:
        fh.write(BSD_MAGIC)
        fh.write(
            struct.pack(
                "<IIIIHH", BSD_VERSION, n, cfg.pad_rows, cfg.pad_cols, rows, cols
            )
        )
        fh.write(sample.cloud.astype("<f4").tobytes())
        fh.write(sample.clean_cloud.astype("<f4").tobytes())
        fh.write(sample.target.values.astype("<f4").tobytes())
        fh.write(sample.target.mask.astype("u1").tobytes())


def read_sample(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != BSD_MAGIC:
        raise ParseError(f"{path}: not a BSDS sample file")
    version, n, pad_rows, pad_cols, rows, cols = struct.unpack_from("<IIIIHH", data, 4)
    if version != BSD_VERSION:
        raise ParseError(f"{path}: unsupported sample version {version}")
    off = 4 + struct.calcsize("<IIIIHH")
    def take(count, dtype):
        nonlocal off
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return arr
    cloud = take(n * 3, "<f4").reshape(n, 3).astype(float)
    clean = take(n * 3, "<f4").reshape(n, 3).astype(float)
    values = take(pad_rows * pad_cols * 3, "<f4").reshape(pad_rows, pad_cols, 3).astype(float)
    mask = take(pad_rows * pad_cols, "u1").reshape(pad_rows, pad_cols).copy()
    sample_id = int(Path(path).stem.split("_")[-1])
    return DatasetSample(
        cloud=cloud,
        target=PaddedTarget(values=values, mask=mask),
        true_grid=(rows, cols),
        clean_cloud=clean,
        sample_id=sample_id,
    )


def load_dataset(directory):
    """Read a dataset directory; returns (GenConfig, samples ordered by id)."""
    directory = Path(directory)
    cfg, counts = read_manifest(directory / "manifest.txt")
    total = sum(counts.values())
    samples = [read_sample(directory / f"sample_{i}.bsd") for i in range(total)]
    return cfg, samples


def random_heightfield_cloud(res, octaves, amplitude, noise_sigma, seed):
    """Out-of-distribution evaluation clouds: multi-octave value noise.

    z is a sum of bilinearly interpolated random lattices with frequency 2^o
    and amplitude 0.5^o over the unit square, scaled by ``amplitude``; the
    points are then jittered with Gaussian noise and shuffled.
    """
    if res < 8:
        raise ConfigurationError(f"res must be >= 8, got {res}")
    rng = np.random.default_rng(seed)
    g = np.linspace(0.0, 1.0, res)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    z = np.zeros((res, res))
    for octave in range(octaves):
        freq = 2 ** octave
        lattice = rng.uniform(-1.0, 1.0, (freq + 1, freq + 1))
        ix = np.minimum((gx * freq).astype(int), freq - 1)
        iy = np.minimum((gy * freq).astype(int), freq - 1)
        fx = gx * freq - ix
        fy = gy * freq - iy
        z += 0.5 ** octave * (
            lattice[ix, iy] * (1 - fx) * (1 - fy)
            + lattice[ix + 1, iy] * fx * (1 - fy)
            + lattice[ix, iy + 1] * (1 - fx) * fy
            + lattice[ix + 1, iy + 1] * fx * fy
        )
    pts = np.column_stack([gx.ravel(), gy.ravel(), amplitude * z.ravel()])
    pts += rng.normal(0.0, noise_sigma, pts.shape)
    return pts[rng.permutation(len(pts))]
