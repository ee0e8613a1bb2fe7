"""Training loop: Adam on cross-entropy with class-balanced epochs.

Every epoch draws a balanced, shuffled sample of training images (largest
class count per class, with replacement), crops one random patch per
draw, and steps in fixed-size batches.  The checkpoint keeps the weights
of the best validation epoch, not the last one.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import EvalPool, TrainPool, to_tensor
from .model import PatchClassifier


@dataclass
class TrainConfig:
    patch: int = 64
    batch_size: int = 24
    epochs: int = 10
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    rotate_augment: bool = False
    base_width: int = 16

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**raw)


def evaluate(model: PatchClassifier, pool: EvalPool, batch_size: int) -> float:
    """Accuracy (percent) on a pool of fixed patches."""
    model.eval()
    hits = total = 0
    with torch.no_grad():
        for x, y in pool.batches(batch_size):
            pred = model(x).argmax(dim=1)
            hits += int((pred == y).sum())
            total += int(y.numel())
    return 100.0 * hits / total


def train(manifest: str | os.PathLike, config: TrainConfig,
          out_path: str | os.PathLike, log=print) -> dict:
    """Train on a corpus manifest and write the best-validation checkpoint.

    Returns a summary dict with per-epoch losses and accuracies.
    """
    torch.manual_seed(config.seed)
    pool = TrainPool(manifest, config.patch, rotate=config.rotate_augment)
    val = EvalPool(manifest, config.patch, "val")
    model = PatchClassifier(base=config.base_width)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr,
                                 betas=(config.beta1, config.beta2),
                                 eps=config.eps)
    loss_fn = nn.CrossEntropyLoss()

    history = []
    best_acc = -1.0
    best_state = None
    for epoch in range(config.epochs):
        rng = np.random.default_rng([config.seed, epoch])
        order = pool.balanced_epoch(rng)
        model.train()
        losses = []
        for start in range(0, len(order), config.batch_size):
            chunk = order[start:start + config.batch_size]
            x = torch.stack([to_tensor(pool.draw(i, rng)) for i in chunk])
            y = torch.tensor([pool.labels[i] for i in chunk], dtype=torch.long)
            optimizer.zero_grad()
            loss = loss_fn(model(x), y)
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        val_acc = evaluate(model, val, config.batch_size)
        history.append({"epoch": epoch, "loss": float(np.mean(losses)),
                        "val_acc": val_acc})
        log(f"epoch {epoch}: loss {np.mean(losses):.4f}  val {val_acc:.2f}%")
        if val_acc > best_acc:
            best_acc = val_acc
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"state_dict": best_state, "config": asdict(config),
                "best_val_acc": best_acc}, out_path)
    return {"history": history, "best_val_acc": best_acc,
            "checkpoint": str(out_path)}


def load_checkpoint(path: str | os.PathLike) -> tuple[PatchClassifier, TrainConfig]:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    config = TrainConfig(**blob["config"])
    model = PatchClassifier(base=config.base_width)
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model, config
