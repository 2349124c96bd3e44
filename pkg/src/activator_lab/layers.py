"""Parameterized primitive layers shared by all architectures.

Initialization: weights ~ Uniform(-1/sqrt(in_dim), +1/sqrt(in_dim)), biases
zero, layernorm gamma=1 beta=0. Everything is driven by one numpy Generator
consumed in construction order, so a seed fully determines the parameters.
"""

import numpy as np

from .tensor import Tensor, ShapeError


class ConfigError(ValueError):
    """Invalid layer/model configuration."""


def uniform_init(rng, in_dim, shape, dtype):
    bound = 1.0 / np.sqrt(in_dim)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear:
    """Affine map x @ W + b applied along the last dim."""

    def __init__(self, rng, in_dim, out_dim, dtype=np.float32, name="linear"):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Tensor(uniform_init(rng, in_dim, (in_dim, out_dim), dtype),
                             requires_grad=True, name=f"{name}.weight")
        self.bias = Tensor(np.zeros(out_dim, dtype=dtype),
                           requires_grad=True, name=f"{name}.bias")

    def __call__(self, x):
        if x.shape[-1] != self.in_dim:
            raise ShapeError(
                f"linear expects last dim {self.in_dim}, got {x.shape}")
        return x @ self.weight + self.bias

    def parameters(self):
        return [self.weight, self.bias]


class LayerNorm:
    """Learned per-channel scale/shift around last-dim standardization."""

    def __init__(self, dim, eps=1e-5, dtype=np.float32, name="ln"):
        self.dim = dim
        self.eps = eps
        self.gamma = Tensor(np.ones(dim, dtype=dtype), requires_grad=True,
                            name=f"{name}.gamma")
        self.beta = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True,
                           name=f"{name}.beta")

    def __call__(self, x):
        return x.layernorm(self.gamma, self.beta, eps=self.eps)

    def parameters(self):
        return [self.gamma, self.beta]


class MlpBlock:
    """Two-layer MLP with GELU between: fc2(GELU(fc1(x)))."""

    def __init__(self, rng, d_in, d_hidden, dtype=np.float32, name="mlp"):
        self.fc1 = Linear(rng, d_in, d_hidden, dtype, name=f"{name}.fc1")
        self.fc2 = Linear(rng, d_hidden, d_in, dtype, name=f"{name}.fc2")

    def __call__(self, x):
        return self.fc2(self.fc1(x).gelu())

    def parameters(self):
        return self.fc1.parameters() + self.fc2.parameters()


def patchify(images, ps):
    """[b, 3, s, s] uint8/float array -> [b, (s/ps)^2, ps*ps*3] patch vectors.

    Patches in row-major grid order; within a patch channel-major, then
    row-major over pixels. Pure numpy: images carry no gradient.
    """
    images = np.asarray(images)
    if images.ndim != 4 or images.shape[1] != 3:
        raise ShapeError(f"expected [b, 3, s, s] images, got {images.shape}")
    s = images.shape[2]
    if images.shape[3] != s:
        raise ShapeError(f"expected square images, got {images.shape}")
    if s % ps != 0:
        raise ConfigError(f"image side {s} not divisible by patch size {ps}")
    g = s // ps
    b = images.shape[0]
    x = images.reshape(b, 3, g, ps, g, ps)
    x = x.transpose(0, 2, 4, 1, 3, 5)          # b, gy, gx, c, py, px
    return x.reshape(b, g * g, 3 * ps * ps)


def unpatchify(patches, ps, side=32):
    """Inverse of patchify (test/verification helper)."""
    patches = np.asarray(patches)
    g = side // ps
    b = patches.shape[0]
    x = patches.reshape(b, g, g, 3, ps, ps)
    x = x.transpose(0, 3, 1, 4, 2, 5)
    return x.reshape(b, 3, side, side)


class PatchEmbed:
    """Linear projection of flattened ps x ps x 3 patches into d_model."""

    def __init__(self, rng, ps, d_model, side=32, dtype=np.float32,
                 name="patch_embed"):
        if side % ps != 0:
            raise ConfigError(f"image side {side} not divisible by ps={ps}")
        self.ps = ps
        self.side = side
        self.n_tokens = (side // ps) ** 2
        self.projection = Linear(rng, ps * ps * 3, d_model, dtype,
                                 name=f"{name}.projection")

    def __call__(self, images):
        return self.embed_patches(patchify(images, self.ps))

    def embed_patches(self, patch_vectors):
        return self.projection(Tensor(patch_vectors))

    def parameters(self):
        return self.projection.parameters()
