"""Token-processing mechanisms: multi-head attention, gated (GEGLU) MLP,
token-mixing MLP pair, and the learned-linear synthesizer mixer.

Each block consumes the already-normalized nonresidual path; the model applies
the pre-norm and the residual add.
"""

import math

import numpy as np

from .layers import ConfigError, LayerNorm, Linear, MlpBlock


class AttentionBlock:
    """Multi-head scaled dot-product attention, unmasked.

    Per head: softmax(Q K^T / sqrt(d_head)) V; heads concatenated, then the
    output projection.
    """

    def __init__(self, rng, d_model, heads, dtype=np.float32, name="attn"):
        if d_model % heads != 0:
            raise ConfigError(
                f"d_model={d_model} not divisible by heads={heads}")
        self.d_model = d_model
        self.heads = heads
        self.d_head = d_model // heads
        self.wq = Linear(rng, d_model, d_model, dtype, name=f"{name}.wq")
        self.wk = Linear(rng, d_model, d_model, dtype, name=f"{name}.wk")
        self.wv = Linear(rng, d_model, d_model, dtype, name=f"{name}.wv")
        self.wo = Linear(rng, d_model, d_model, dtype, name=f"{name}.wo")

    def _split_heads(self, x, b, t):
        # [b, t, d_model] -> [b, h, t, d_head]
        return x.reshape(b, t, self.heads, self.d_head).permute((0, 2, 1, 3))

    def __call__(self, x):
        b, t, _ = x.shape
        q = self._split_heads(self.wq(x), b, t)
        k = self._split_heads(self.wk(x), b, t)
        v = self._split_heads(self.wv(x), b, t)
        scores = (q @ k.transpose()) * (1.0 / math.sqrt(self.d_head))
        weights = scores.softmax(axis=-1)
        ctx = weights @ v                                # [b, h, t, d_head]
        ctx = ctx.permute((0, 2, 1, 3)).reshape(b, t, self.d_model)
        return self.wo(ctx)

    def attention_weights(self, x):
        """Per-head attention matrices for inspection/tests."""
        b, t, _ = x.shape
        q = self._split_heads(self.wq(x), b, t)
        k = self._split_heads(self.wk(x), b, t)
        scores = (q @ k.transpose()) * (1.0 / math.sqrt(self.d_head))
        return scores.softmax(axis=-1)

    def parameters(self):
        return (self.wq.parameters() + self.wk.parameters()
                + self.wv.parameters() + self.wo.parameters())


class GegluBlock:
    """Gated MLP: down(maybe_norm(up_value(x)) * maybe_norm(gelu(up_gate(x)))).

    d_hidden is the full hidden width; no 2/3 reduction. The optional stream
    layernorms sit after each up projection (on the gated stream, after the
    GELU).
    """

    def __init__(self, rng, d_model, d_hidden, stream_norm=True,
                 dtype=np.float32, name="geglu"):
        self.d_model = d_model
        self.d_hidden = d_hidden
        self.stream_norm_enabled = stream_norm
        self.up_value = Linear(rng, d_model, d_hidden, dtype,
                               name=f"{name}.up_value")
        self.up_gate = Linear(rng, d_model, d_hidden, dtype,
                              name=f"{name}.up_gate")
        self.down = Linear(rng, d_hidden, d_model, dtype, name=f"{name}.down")
        self.value_norm = LayerNorm(d_hidden, dtype=dtype,
                                    name=f"{name}.value_norm")
        self.gate_norm = LayerNorm(d_hidden, dtype=dtype,
                                   name=f"{name}.gate_norm")

    def __call__(self, x):
        p1 = self.up_value(x)
        p2 = self.up_gate(x).gelu()
        if self.stream_norm_enabled:
            p1 = self.value_norm(p1)
            p2 = self.gate_norm(p2)
        return self.down(p1 * p2)

    def parameters(self):
        params = (self.up_value.parameters() + self.up_gate.parameters()
                  + self.down.parameters())
        if self.stream_norm_enabled:
            params += self.value_norm.parameters() + self.gate_norm.parameters()
        return params


class MixerBlockPair:
    """Token-mixing MLP over the token axis plus a channel MLP.

    token_forward transposes token/channel axes, runs the token MLP, and
    transposes back; the channel MLP is the usual per-token MLP the model
    wires into the second residual sub-block.
    """

    def __init__(self, rng, n_tokens, d_model, d_token_hidden,
                 d_channel_hidden, dtype=np.float32, name="mixer"):
        self.n_tokens = n_tokens
        self.token_mlp = MlpBlock(rng, n_tokens, d_token_hidden, dtype,
                                  name=f"{name}.token_mlp")
        self.channel_mlp = MlpBlock(rng, d_model, d_channel_hidden, dtype,
                                    name=f"{name}.channel_mlp")

    def token_forward(self, x):
        if x.shape[1] != self.n_tokens:
            raise ConfigError(
                f"token mixer built for {self.n_tokens} tokens, got "
                f"{x.shape[1]}")
        return self.token_mlp(x.transpose()).transpose()

    __call__ = token_forward

    def parameters(self):
        return self.token_mlp.parameters() + self.channel_mlp.parameters()


class SynthesizerMixer:
    """Learned token-local linear map standing in for attention."""

    def __init__(self, rng, d_model, dtype=np.float32, name="synth"):
        self.proj = Linear(rng, d_model, d_model, dtype, name=f"{name}.proj")

    def __call__(self, x):
        return self.proj(x)

    def parameters(self):
        return self.proj.parameters()
