"""Finite-difference verification of the autodiff engine through full models.

Runs at 64-bit on miniature configurations; the step is h = 1e-5 * max(1, |x|)
per perturbed entry and errors are reported as
|ad - fd| / max(1, |ad|, |fd|).
"""

import numpy as np

from . import tensor as T
from .models import ModelConfig, build
from .optim import cross_entropy

MINIATURE = dict(ps=16, d_model=8, n_blocks=2, d_mlp=16, heads=2, n_classes=3)


def central_difference(f, x, idx, h):
    old = x[idx]
    x[idx] = old + h
    up = f()
    x[idx] = old - h
    down = f()
    x[idx] = old
    return (up - down) / (2.0 * h)


def param_fd_errors(f, param, ad_grad, rng, max_entries=40, h_scale=1e-5):
    """Max mixed relative/absolute error over sampled entries of one tensor."""
    flat = param.data.reshape(-1)
    grad_flat = ad_grad.reshape(-1)
    n = flat.size
    if n <= max_entries:
        entries = np.arange(n)
    else:
        entries = rng.choice(n, size=max_entries, replace=False)
    worst = 0.0
    for i in entries:
        h = h_scale * max(1.0, abs(flat[i]))
        fd = central_difference(f, flat, i, h)
        ad = grad_flat[i]
        err = abs(ad - fd) / max(1.0, abs(ad), abs(fd))
        worst = max(worst, err)
    return worst


def check_tensor_op(make_loss, params, seed=0, max_entries=40):
    """Generic check: make_loss() -> scalar Tensor built from params.

    Returns dict param_name -> max error.
    """
    rng = np.random.default_rng(seed)
    for p in params:
        p.zero_grad()
    loss = make_loss()
    loss.backward()
    # parameters unreached by the loss have zero gradient
    ad_grads = {p.name: (np.zeros_like(p.data) if p.grad is None
                         else np.array(p.grad)) for p in params}

    def f():
        with T.no_grad():
            return make_loss().item()

    return {p.name: param_fd_errors(f, p, ad_grads[p.name], rng, max_entries)
            for p in params}


def gradcheck_model(arch, seed=0, batch=2, max_entries=25,
                    pos_embed=True, stream_norm=True):
    """Finite-difference check of one architecture at miniature scale.

    Returns dict param name -> max error (64-bit throughout).
    """
    config = ModelConfig(arch=arch, pos_embed=pos_embed,
                         stream_norm=stream_norm, seed=seed, **MINIATURE)
    model = build(config, dtype=np.float64)
    rng = np.random.default_rng(seed + 1)
    images = rng.standard_normal((batch, 3, 32, 32))
    labels = rng.integers(0, config.n_classes, size=batch)

    def make_loss():
        return cross_entropy(model.forward(images), labels)

    T.set_verify(True)
    try:
        return check_tensor_op(make_loss, model.parameters(), seed=seed,
                               max_entries=max_entries)
    finally:
        T.set_verify(False)


def gradcheck_report(arch, tol=1e-4, **kwargs):
    """(passed, lines) summary for the CLI; one line per parameter group."""
    errors = gradcheck_model(arch, **kwargs)
    lines = []
    passed = True
    for name, err in errors.items():
        ok = err < tol
        passed &= ok
        lines.append(f"{'ok  ' if ok else 'FAIL'} {name:40s} "
                     f"max_rel_err={err:.3e}")
    return passed, lines
