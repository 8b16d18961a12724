"""Loss, gradients, optimizer, and the training loop.

Training minimizes a weighted mean squared error between the predicted and
ground-truth padded control-point matrices.  Entries outside the mask (the
zero padding) carry weight ``w_pad`` >= 1, which presses the network to keep
inactive rows and columns near zero so the grid size survives thresholded
extraction.

Each sample is normalized through the same unit-cube frame that inference
applies (see :mod:`splinefit.pipeline`), so train-time and reconstruct-time
inputs share one scale.  Gradients come from the reverse-mode tape in
:mod:`splinefit.autodiff`; the optimizer is standard Adam with bias
correction.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .clouds import unit_cube_frame
from .errors import ConfigurationError
from .model import (
    check_params,
    forward_tape,
    init_params,
    prepare_cloud,
    save_checkpoint,
)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 200
    batch_size: int = 16
    w_pad: float = 2.0
    seed: int = 0
    grad_check: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ConfigurationError("invalid training configuration")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError("betas must lie in (0, 1)")
        if self.w_pad < 1:
            raise ConfigurationError("w_pad must be >= 1")


def weighted_mse(pred, target, w_pad):
    """Padding-weighted MSE between a prediction and a PaddedTarget.

    ``L = sum_ij w_ij ||pred_ij - target_ij||^2 / sum_ij 3 w_ij`` with
    ``w_ij = w_pad`` on padding (mask 0) and 1 on real entries.
    """
    pred = np.asarray(pred, dtype=float)
    if pred.shape != target.values.shape:
        raise ConfigurationError(
            f"prediction shape {pred.shape} != target {target.values.shape}"
        )
    w = np.where(target.mask == 0, w_pad, 1.0)
    sq = ((pred - target.values) ** 2).sum(axis=2)
    return float((w * sq).sum() / (3.0 * w.sum()))


@dataclass
class TrainingExample:
    """A dataset sample preprocessed for the network: normalized cloud with
    its cached graph, plus the target in the same normalized frame."""

    sample_id: int
    prep: object = field(repr=False)
    target_flat: np.ndarray = field(repr=False)
    mask_flat: np.ndarray = field(repr=False)
    true_grid: tuple = (0, 0)


def prepare_example(sample, k):
    shift, scale = unit_cube_frame(sample.cloud)
    prep = prepare_cloud((sample.cloud - shift) / scale, k)
    mask3 = np.repeat(sample.target.mask.ravel(), 3).astype(float)
    target = (sample.target.values - shift) / scale
    target_flat = target.ravel() * mask3  # padding entries stay exactly zero
    return TrainingExample(
        sample_id=sample.sample_id,
        prep=prep,
        target_flat=target_flat,
        mask_flat=mask3,
        true_grid=sample.true_grid,
    )


def prepare_examples(samples, arch):
    return [prepare_example(s, arch.k_neighbors) for s in samples]


def _loss_tape(out, example, w_pad, dtype):
    w = np.where(example.mask_flat == 0, w_pad, 1.0).astype(dtype)
    diff = ad.add_const(out, -example.target_flat[None, :].astype(dtype))
    return ad.wsum(ad.mul(diff, diff), (w / w.sum())[None, :])


def _as_examples(batch, arch):
    return [
        b if isinstance(b, TrainingExample) else prepare_example(b, arch.k_neighbors)
        for b in batch
    ]


def batch_loss(params, arch, batch, w_pad):
    """Mean weighted-MSE loss over a batch (forward only)."""
    check_params(params, arch)
    dtype = next(iter(params.values())).dtype
    total = 0.0
    for example in _as_examples(batch, arch):
        ptensors = {name: ad.tensor(arr) for name, arr in params.items()}
        out = forward_tape(ptensors, arch, example.prep)
        total += float(_loss_tape(out, example, w_pad, dtype).data)
    return total / len(batch)


def compute_gradients(params, arch, batch, w_pad):
    """Gradients of the mean batch loss for every named tensor.

    Accepts DatasetSamples or preprocessed TrainingExamples.  Returns
    ``(grads, loss)``; per-sample contributions accumulate in a fixed order
    so results do not depend on scheduling.
    """
    check_params(params, arch)
    if not batch:
        raise ConfigurationError("batch must be nonempty")
    dtype = next(iter(params.values())).dtype
    grads = {name: np.zeros_like(arr) for name, arr in params.items()}
    total = 0.0
    inv = 1.0 / len(batch)
    for example in _as_examples(batch, arch):
        ptensors = {
            name: ad.tensor(arr, requires_grad=True)
            for name, arr in params.items()
        }
        out = forward_tape(ptensors, arch, example.prep)
        loss = _loss_tape(out, example, w_pad, dtype)
        ad.backward(loss, seed=inv)
        total += float(loss.data)
        for name, t in ptensors.items():
            if t.grad is not None:
                grads[name] += t.grad
    return grads, total * inv


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0


def init_adam_state(params):
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def adam_step(params, grads, state, cfg):
    """One Adam update with bias correction; mutates params and state."""
    state.step += 1
    t = state.step
    b1, b2 = cfg.beta1, cfg.beta2
    for name, p in params.items():
        g = grads[name].astype(p.dtype)
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = state.m[name] / (1 - b1 ** t)
        v_hat = state.v[name] / (1 - b2 ** t)
        p -= (cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)).astype(
            p.dtype
        )
    return params, state


def is_validation_id(sample_id):
    """90/10 split by a multiplicative hash of the sample id."""
    return (sample_id * 2654435761 % 2**32) % 10 == 0


@dataclass
class TrainResult:
    params: dict
    history: list
    best_epoch: int
    checkpoint_path: Path
    history_path: Path


def _spot_check_gradients(params, arch, examples, w_pad, probes=5, h=1e-3):
    rng = np.random.default_rng(0)
    grads, _ = compute_gradients(params, arch, examples, w_pad)
    names = sorted(params)
    for _ in range(probes):
        name = names[rng.integers(len(names))]
        idx = rng.integers(params[name].size)
        orig = params[name].ravel()[idx]
        params[name].ravel()[idx] = orig + h
        up = batch_loss(params, arch, examples, w_pad)
        params[name].ravel()[idx] = orig - h
        dn = batch_loss(params, arch, examples, w_pad)
        params[name].ravel()[idx] = orig
        fd = (up - dn) / (2 * h)
        got = grads[name].ravel()[idx]
        if abs(got - fd) > 1e-2 * max(1.0, abs(got), abs(fd)):
            raise ConfigurationError(
                f"gradient spot check failed for {name}[{idx}]: {got} vs {fd}"
            )


def train(samples, arch, cfg, out_dir, degrees=(2, 2), dtype=np.float32,
          log=None):
    """Fit the network to a dataset with shuffled mini-batch Adam.

    Splits samples 90/10 by id hash, records per-epoch train/validation
    losses, and writes the best-validation checkpoint plus a
    ``loss_history.csv`` into ``out_dir``.
    """
    if not samples:
        raise ConfigurationError("dataset is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_set = [s for s in samples if not is_validation_id(s.sample_id)]
    val_set = [s for s in samples if is_validation_id(s.sample_id)]
    if not train_set or not val_set:
        raise ConfigurationError("both splits must be nonempty; add samples")

    train_ex = prepare_examples(train_set, arch)
    val_ex = prepare_examples(val_set, arch)
    params = init_params(arch, np.random.default_rng(
        np.random.SeedSequence([cfg.seed, 0])), dtype=dtype)
    if cfg.grad_check:
        _spot_check_gradients(params, arch, train_ex[:2], cfg.w_pad)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    state = init_adam_state(params)

    history = []
    best = (np.inf, -1, None)
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(train_ex))
        seen = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [train_ex[i] for i in order[lo:lo + cfg.batch_size]]
            grads, loss = compute_gradients(params, arch, batch, cfg.w_pad)
            adam_step(params, grads, state, cfg)
            seen += loss * len(batch)
        train_loss = seen / len(train_ex)
        val_loss = batch_loss(params, arch, val_ex, cfg.w_pad)
        history.append((epoch, train_loss, val_loss))
        if val_loss < best[0]:
            best = (val_loss, epoch, {k: p.copy() for k, p in params.items()})
        if log is not None:
            log(f"epoch {epoch}: train {train_loss:.6f} val {val_loss:.6f}")

    history_path = out_dir / "loss_history.csv"
    with open(history_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tr, va in history:
            writer.writerow([epoch, f"{tr:.9g}", f"{va:.9g}"])
    checkpoint_path = out_dir / "checkpoint.bsck"
    save_checkpoint(checkpoint_path, best[2], arch, degrees=degrees)
    return TrainResult(
        params=best[2],
        history=history,
        best_epoch=best[1],
        checkpoint_path=checkpoint_path,
        history_path=history_path,
    )
