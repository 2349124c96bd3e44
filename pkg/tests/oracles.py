"""Independent brute-force oracles (explicit loops, scalar math).

These deliberately avoid the package's tensor ops so that agreement between
the two routes is meaningful evidence.
"""

import math

import numpy as np


def matmul_loops(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for l in range(k):
                s += a[i, l] * b[l, j]
            out[i, j] = s
    return out


def linear_loops(x, w, b):
    """Per-element dot product over the last dim of x."""
    x = np.asarray(x, dtype=np.float64)
    lead = x.shape[:-1]
    out = np.zeros(lead + (w.shape[1],))
    for idx in np.ndindex(*lead):
        for j in range(w.shape[1]):
            s = b[j]
            for l in range(w.shape[0]):
                s += x[idx][l] * w[l, j]
            out[idx][j] = s
    return out


def softmax_direct(v):
    v = np.asarray(v, dtype=np.float64)
    e = [math.exp(x - max(v)) for x in v]
    z = sum(e)
    return np.array([x / z for x in e])


def gelu_scalar(x):
    return x * 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def layernorm_direct(v, gamma, beta, eps=1e-5):
    v = np.asarray(v, dtype=np.float64)
    mu = sum(v) / len(v)
    var = sum((x - mu) ** 2 for x in v) / len(v)
    return np.array([(x - mu) / math.sqrt(var + eps) * g + b
                     for x, g, b in zip(v, gamma, beta)])


def attention_loops(x, wq, bq, wk, bk, wv, bv, wo, bo, heads):
    """Explicit query/key double loop, one sequence [t, d]."""
    t, d = x.shape
    dh = d // heads
    q = linear_loops(x, wq, bq)
    k = linear_loops(x, wk, bk)
    v = linear_loops(x, wv, bv)
    ctx = np.zeros((t, d))
    for h in range(heads):
        sl = slice(h * dh, (h + 1) * dh)
        for i in range(t):
            scores = np.zeros(t)
            for j in range(t):
                scores[j] = float(np.dot(q[i, sl], k[j, sl])) / math.sqrt(dh)
            weights = softmax_direct(scores)
            for j in range(t):
                ctx[i, sl] += weights[j] * v[j, sl]
    return linear_loops(ctx, wo, bo)


def geglu_loops(x, w_value, b_value, w_gate, b_gate, w_down, b_down,
                stream_norms=None):
    """linear -> gelu -> (optional stream layernorms) -> hadamard -> linear.

    stream_norms: None, or ((gamma_v, beta_v), (gamma_g, beta_g)).
    """
    x = np.asarray(x, dtype=np.float64)
    t, _ = x.shape
    h = w_value.shape[1]
    out_rows = []
    for i in range(t):
        p1 = linear_loops(x[i:i + 1], w_value, b_value)[0]
        p2_pre = linear_loops(x[i:i + 1], w_gate, b_gate)[0]
        p2 = np.array([gelu_scalar(z) for z in p2_pre])
        if stream_norms is not None:
            (gv, bv_), (gg, bg) = stream_norms
            p1 = layernorm_direct(p1, gv, bv_)
            p2 = layernorm_direct(p2, gg, bg)
        gated = np.array([p1[j] * p2[j] for j in range(h)])
        out_rows.append(linear_loops(gated[None, :], w_down, b_down)[0])
    return np.stack(out_rows)


def mlp_loops(x, w1, b1, w2, b2):
    hidden = linear_loops(x, w1, b1)
    act = np.vectorize(gelu_scalar)(hidden)
    return linear_loops(act, w2, b2)


def token_mix_loops(x, w1, b1, w2, b2):
    """transpose -> mlp -> transpose on one sequence [t, d]."""
    return mlp_loops(np.asarray(x, dtype=np.float64).T, w1, b1, w2, b2).T


def cross_entropy_direct(logits, labels):
    logits = np.asarray(logits, dtype=np.float64)
    total = 0.0
    for row, y in zip(logits, labels):
        p = softmax_direct(row)
        total += -math.log(p[y])
    return total / len(labels)
