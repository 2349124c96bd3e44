"""Adam, softmax cross-entropy, evaluation, and the epoch training loop."""

import csv
import time
from dataclasses import dataclass

import numpy as np

from . import data as data_mod
from .checkpoint import save_checkpoint
from .tensor import Tensor, no_grad


class TrainingError(RuntimeError):
    """Non-finite loss/gradient or incompatible training inputs."""


def cross_entropy(logits, labels):
    """Mean over the batch of -log softmax(logits)[label], via log-sum-exp."""
    labels = np.asarray(labels)
    b, c = logits.shape
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels must lie in [0, {c}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    x = logits.data
    m = x.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(x - m).sum(axis=1))
    picked = x[np.arange(b), labels]
    loss = (lse - picked).mean()

    def bwd(g, x=x, m=m, labels=labels, b=b):
        p = np.exp(x - m)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(b), labels] -= 1.0
        return (g * p / b,)
    return Tensor._from_op(np.asarray(loss), (logits,), bwd)


class Adam:
    """Adam with bias-corrected moment estimates."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for {p.name}")
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float
    seconds: float


METRICS_HEADER = ["epoch", "train_loss", "train_acc", "test_loss",
                  "test_acc", "seconds"]


def write_metrics_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(METRICS_HEADER)
        for r in rows:
            w.writerow([r.epoch] + [f"{v:.6f}" for v in
                       (r.train_loss, r.train_acc, r.test_loss, r.test_acc,
                        r.seconds)])


def evaluate(model, dataset, batch_size=256, dtype=np.float32):
    """Full-split loss and accuracy (%); argmax ties go to the lowest class."""
    total_loss = 0.0
    correct = 0
    n = len(dataset)
    with no_grad():
        for batch in data_mod.batches(dataset, batch_size, shuffle=False,
                                      dtype=dtype):
            logits = model.forward(batch.images)
            loss = cross_entropy(logits, batch.labels)
            total_loss += loss.item() * len(batch.labels)
            pred = np.argmax(logits.data, axis=1)
            correct += int((pred == batch.labels).sum())
    return total_loss / n, 100.0 * correct / n


def train(model, train_ds, test_ds, epochs, batch_size, lr=1e-3, seed=0,
          out_dir=None, checkpoint_interval=0, eval_batch_size=256,
          log=None, max_steps=None, timer=time.perf_counter):
    """Epoch loop: shuffled train pass with an Adam step per batch, then a
    full test evaluation. Deterministic given the seed.

    Returns (optimizer, list of EpochMetrics). With out_dir set, writes
    metrics.csv, final.ckpt, best.ckpt (by test accuracy) and optional
    periodic epoch checkpoints.
    """
    if train_ds.n_classes != model.config.n_classes:
        raise TrainingError(
            f"model has {model.config.n_classes} classes, dataset has "
            f"{train_ds.n_classes}")
    opt = Adam(model.parameters(), lr=lr)
    metrics = []
    best_acc = -1.0
    steps = 0
    for epoch in range(epochs):
        t0 = timer()
        epoch_loss = 0.0
        epoch_correct = 0
        seen = 0
        for batch in data_mod.batches(train_ds, batch_size, base_seed=seed,
                                      epoch=epoch, dtype=model.dtype):
            opt.zero_grad()
            logits = model.forward(batch.images)
            loss = cross_entropy(logits, batch.labels)
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                if out_dir is not None:
                    save_checkpoint(f"{out_dir}/final.ckpt", model)
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} step {steps}")
            loss.backward()
            opt.step()
            b = len(batch.labels)
            epoch_loss += loss_val * b
            epoch_correct += int(
                (np.argmax(logits.data, axis=1) == batch.labels).sum())
            seen += b
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break
        test_loss, test_acc = evaluate(model, test_ds, eval_batch_size,
                                       dtype=model.dtype)
        row = EpochMetrics(epoch=epoch,
                           train_loss=epoch_loss / seen,
                           train_acc=100.0 * epoch_correct / seen,
                           test_loss=test_loss,
                           test_acc=test_acc,
                           seconds=timer() - t0)
        metrics.append(row)
        if log is not None:
            log(f"epoch {epoch}: train_loss={row.train_loss:.4f} "
                f"train_acc={row.train_acc:.2f} test_loss={row.test_loss:.4f} "
                f"test_acc={row.test_acc:.2f} ({row.seconds:.1f}s)")
        if out_dir is not None:
            write_metrics_csv(f"{out_dir}/metrics.csv", metrics)
            if test_acc > best_acc:
                best_acc = test_acc
                save_checkpoint(f"{out_dir}/best.ckpt", model)
            if checkpoint_interval and (epoch + 1) % checkpoint_interval == 0:
                save_checkpoint(f"{out_dir}/epoch{epoch}.ckpt", model)
        if max_steps is not None and steps >= max_steps:
            break
    if out_dir is not None:
        save_checkpoint(f"{out_dir}/final.ckpt", model)
    return opt, metrics
