"""Training and evaluation loops for the N-body and toy-energy tasks.

Every run writes three files to its output directory:

    model.pckp    parameters (PCKP checkpoint)
    config.json   training + model configuration, needed to rebuild the model
    metrics.csv   epoch,lr,train_loss,val_loss
"""
import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import AdamState, Tape, adam_step, cosine_lr, load_checkpoint, ops, save_checkpoint
from .geometry import random_rotation
from .graph import batch_graphs
from .grids import load_or_generate_grid, repulsion_grid
from .models import (
    ModelConfig,
    Pnita,
    PnitaVectorBaseline,
    Ponita,
    energy_and_forces,
    parameter_count,
)
from .nbody import nbody_featurize
from .toy_energy import toy_featurize

log = logging.getLogger(__name__)

TASKS = ("nbody", "toy-energy")
MODELS = ("ponita", "pnita")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    task: str = "nbody"
    model: str = "ponita"
    layers: int = 5
    channels: int = 64
    grid_n: int = 12
    basis_dim: int = 64
    degree: int = 3
    epochs: int = 500
    batch: int = 32
    lr: float = 5e-4
    warmup: int | None = None
    seed: int = 0
    f32: bool = False
    val_fraction: float = 0.1
    lambda_e: float = 1.0
    lambda_f: float = 500.0
    rotate_grids: bool = True
    match_params_to: int | None = None
    grid_seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.epochs < 1 or self.batch < 1 or self.lr < 0:
            raise ValueError("epochs >= 1, batch >= 1 and lr >= 0 required")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")

    @property
    def warmup_epochs(self):
        return self.warmup if self.warmup is not None else max(1, self.epochs // 20)


@dataclass
class TrainResult:
    params: dict
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    seconds: float = 0.0
    parameter_count: int = 0

    @property
    def final_val(self):
        return self.val_losses[-1] if self.val_losses else float("nan")


# ---------------------------------------------------------------- building

def model_config(cfg, channels=None):
    c = channels or cfg.channels
    if cfg.task == "nbody":
        return ModelConfig(dim=3, num_layers=cfg.layers, channels=c, scalar_in=2, vector_in=2,
                           edge_in=1, readout="vector", degree=cfg.degree,
                           basis_dim=cfg.basis_dim)
    return ModelConfig(dim=3, num_layers=cfg.layers, channels=c, scalar_in=2,
                       readout="scalar", degree=cfg.degree, basis_dim=cfg.basis_dim)


def _model_class(cfg):
    if cfg.model == "ponita":
        return Ponita
    return PnitaVectorBaseline if cfg.task == "nbody" else Pnita


def build_model(cfg, channels=None):
    return _model_class(cfg)(model_config(cfg, channels))


def matched_channels(cfg, target):
    """Channel count whose parameter total is closest to ``target``."""
    best = None
    for c in range(4, 513):
        model = build_model(cfg, c)
        n = parameter_count(model.init(0))
        if best is None or abs(n - target) < abs(best[1] - target):
            best = (c, n)
        if n > target:
            break
    return best[0]


def resolve_channels(cfg):
    if cfg.match_params_to is None:
        return cfg.channels
    return matched_channels(cfg, cfg.match_params_to)


def task_grid(cfg, cache=True):
    if cfg.model != "ponita":
        return None
    if cache:
        return load_or_generate_grid(3, cfg.grid_n, cfg.grid_seed)
    return repulsion_grid(3, cfg.grid_n, rng_seed=cfg.grid_seed)


def featurize(cfg, samples, grid):
    fn = nbody_featurize if cfg.task == "nbody" else toy_featurize
    return [fn(s, grid) for s in samples]


def split(n, val_fraction):
    n_val = int(round(n * val_fraction))
    if n > 1:
        n_val = min(max(n_val, 1 if val_fraction > 0 else 0), n - 1)
    return np.arange(n - n_val), np.arange(n - n_val, n)


# ---------------------------------------------------------------- losses

def _targets(cfg, samples, idx):
    if cfg.task == "nbody":
        return np.concatenate([samples[i].targets["final_positions"] for i in idx])
    e = np.array([samples[i].targets["energy"][0] for i in idx])
    f = np.concatenate([samples[i].targets["forces"] for i in idx])
    return e, f


def batch_loss(cfg, model, params, graph, targets, tape=None):
    """Scalar loss DTensor. ``tape`` is required for the force task."""
    if cfg.task == "nbody":
        out = model(params, graph)
        pos = ops.reshape(out, out.shape[:2])
        pred = ops.add(pos, graph.positions.astype(pos.dtype))
        return ops.mean(ops.square(ops.sub(pred, targets.astype(pos.dtype))))
    e_true, f_true = targets
    energy, forces = energy_and_forces(model, params, graph, tape=tape, create_graph=tape is not None)
    dt = energy.dtype
    le = ops.mean(ops.square(ops.sub(energy, e_true.astype(dt))))
    lf = ops.mul(ops.sum(ops.square(ops.sub(forces, f_true.astype(dt)))),
                 1.0 / (3.0 * f_true.shape[0]))
    return ops.add(ops.mul(le, cfg.lambda_e), ops.mul(lf, cfg.lambda_f))


def _rotated(graph, rng, n):
    G = graph.num_graphs
    rots = np.stack([random_rotation(n, rng) for _ in range(G)])
    return graph.with_(grid_rotations=rots)


def evaluate(cfg, model, params, graphs, samples, idx, batch=None):
    """Mean loss over ``idx`` (sample-weighted), fixed grid."""
    if len(idx) == 0:
        return float("nan")
    batch = batch or cfg.batch
    total, count = 0.0, 0
    for start in range(0, len(idx), batch):
        chunk = idx[start:start + batch]
        graph = batch_graphs([graphs[i] for i in chunk])
        targets = _targets(cfg, samples, chunk)
        loss = batch_loss(cfg, model, params, graph, targets)
        total += float(loss.data) * len(chunk)
        count += len(chunk)
    return total / count


def nbody_mse(model, params, graphs, samples):
    """Plain position MSE over all particles and coordinates."""
    err = []
    for g, s in zip(graphs, samples):
        out = model(params, g).data[:, :, 0]
        err.append((g.positions + out - s.targets["final_positions"]) ** 2)
    return float(np.mean(err))


# ---------------------------------------------------------------- training

def train(cfg, samples, out_dir=None, progress=None):
    """Train on ``samples``; returns :class:`TrainResult` and writes run files if ``out_dir``."""
    t0 = time.perf_counter()
    channels = resolve_channels(cfg)
    model = build_model(cfg, channels)
    grid = task_grid(cfg)
    graphs = featurize(cfg, samples, grid)
    train_idx, val_idx = split(len(samples), cfg.val_fraction)
    dtype = np.float32 if cfg.f32 else np.float64
    params = {k: v.astype(dtype) for k, v in model.init(cfg.seed).items()}
    state = AdamState()
    rng = np.random.default_rng(cfg.seed + 1)
    result = TrainResult(params=params, parameter_count=parameter_count(params))

    writer = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_config(out_dir / "config.json", cfg, model.config)
        fh = open(out_dir / "metrics.csv", "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr", "train_loss", "val_loss"])
    try:
        for epoch in range(cfg.epochs):
            lr = cosine_lr(epoch, cfg.epochs, cfg.warmup_epochs, cfg.lr)
            order = rng.permutation(train_idx)
            losses, weights = [], []
            for start in range(0, len(order), cfg.batch):
                chunk = order[start:start + cfg.batch]
                graph = batch_graphs([graphs[i] for i in chunk])
                if grid is not None and cfg.rotate_grids:
                    graph = _rotated(graph, rng, 3)
                targets = _targets(cfg, samples, chunk)
                tape = Tape()
                tracked = {k: tape.variable(v, name=k) for k, v in params.items()}
                loss = batch_loss(cfg, model, tracked, graph, targets, tape)
                value = float(loss.data)
                if not np.isfinite(value):
                    raise TrainingDiverged(
                        f"non-finite loss {value} at epoch {epoch}, batch starting {start} (lr={lr:g})")
                tape.backward(loss)
                grads = {k: t.grad for k, t in tracked.items()}
                params, state = adam_step(params, grads, state, lr)
                losses.append(value)
                weights.append(len(chunk))
            train_loss = float(np.average(losses, weights=weights))
            val_loss = evaluate(cfg, model, params, graphs, samples, val_idx)
            result.train_losses.append(train_loss)
            result.val_losses.append(val_loss)
            if writer is not None:
                writer.writerow([epoch, repr(lr), repr(train_loss), repr(val_loss)])
                fh.flush()
            if progress is not None:
                progress(epoch, lr, train_loss, val_loss)
    finally:
        if writer is not None:
            fh.close()
    result.params = params
    result.seconds = time.perf_counter() - t0
    if out_dir is not None:
        save_checkpoint(out_dir / "model.pckp", params)
    return result


# ---------------------------------------------------------------- run files

def write_config(path, cfg, mcfg):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"train": asdict(cfg), "model": mcfg.to_dict()}, fh, indent=2)


def load_run(checkpoint):
    """(TrainConfig, model, params) from a checkpoint with its config.json sidecar."""
    checkpoint = Path(checkpoint)
    sidecar = checkpoint.with_name("config.json")
    if not sidecar.exists():
        raise FileNotFoundError(f"missing {sidecar} next to the checkpoint")
    with open(sidecar, encoding="utf-8") as fh:
        blob = json.load(fh)
    cfg = TrainConfig(**blob["train"])
    mcfg = ModelConfig(**blob["model"])
    model = _model_class(cfg)(mcfg)
    params = load_checkpoint(checkpoint)
    expected = model.init(0)
    if set(expected) != set(params) or any(expected[k].shape != params[k].shape for k in expected):
        raise ValueError(f"{checkpoint}: parameters do not match the recorded configuration")
    return cfg, model, params


def evaluate_run(checkpoint, samples):
    """Loss of a saved run on ``samples`` (all of them, fixed grid)."""
    cfg, model, params = load_run(checkpoint)
    graphs = featurize(cfg, samples, task_grid(cfg))
    return evaluate(cfg, model, params, graphs, samples, np.arange(len(samples)))
