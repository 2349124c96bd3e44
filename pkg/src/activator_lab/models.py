"""Assembly of the five classifiers from patch embedding, residual pre-norm
block stacks, global average pooling, and the linear head.

All stacks share the wiring y = x + F(LayerNorm(x)); what differs is F:
attention (vit), token-mixing MLP (mixer), learned linear (synthesizer), or
the gated GEGLU MLP (activator variants). Logits are returned raw; softmax
lives inside the loss.
"""

from dataclasses import dataclass, asdict

import numpy as np

from .blocks import (AttentionBlock, GegluBlock, MixerBlockPair,
                     SynthesizerMixer)
from .layers import (ConfigError, LayerNorm, Linear, MlpBlock, PatchEmbed,
                     patchify, uniform_init)
from .tensor import Tensor, ShapeError

ARCHS = ("vit", "mixer", "synthesizer", "activator", "activator_geglu_only")

IMAGE_SIDE = 32


@dataclass
class ModelConfig:
    arch: str = "vit"
    ps: int = 4
    d_model: int = 256
    n_blocks: int = 4
    d_mlp: int = 512
    heads: int = 4
    n_classes: int = 10
    pos_embed: bool = True
    stream_norm: bool = True
    final_norm: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ConfigError(f"unknown arch {self.arch!r}; expected one of "
                              f"{ARCHS}")
        if IMAGE_SIDE % self.ps != 0:
            raise ConfigError(f"patch size {self.ps} does not divide "
                              f"{IMAGE_SIDE}")
        if self.arch == "vit" and self.d_model % self.heads != 0:
            raise ConfigError(f"d_model={self.d_model} not divisible by "
                              f"heads={self.heads}")

    @property
    def n_tokens(self):
        return (IMAGE_SIDE // self.ps) ** 2

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def paper_config(arch, n_classes=10, seed=0):
    """Shared configuration used for the reported runs."""
    return ModelConfig(arch=arch, ps=4, d_model=256, n_blocks=4, d_mlp=512,
                       heads=4, n_classes=n_classes, seed=seed)


class _Block:
    """One residual stage: pre-norm mixer unit, optional pre-norm MLP unit."""

    def __init__(self, norm1, unit1, norm2=None, unit2=None, params=None):
        self.norm1 = norm1
        self.unit1 = unit1
        self.norm2 = norm2
        self.unit2 = unit2
        self.params = params if params is not None else []

    def __call__(self, x):
        x = x + self.unit1(self.norm1(x))
        if self.unit2 is not None:
            x = x + self.unit2(self.norm2(x))
        return x


class ClassifierModel:
    """Patch embed -> optional pos embed -> block stack -> pool -> head."""

    def __init__(self, config, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        cfg = config
        rng = np.random.default_rng(cfg.seed)
        t = cfg.n_tokens
        d = cfg.d_model

        self.patch_embed = PatchEmbed(rng, cfg.ps, d, side=IMAGE_SIDE,
                                      dtype=dtype)
        if cfg.pos_embed:
            self.pos = Tensor(uniform_init(rng, d, (t, d), dtype),
                              requires_grad=True, name="pos_embed")
        else:
            self.pos = None

        self.blocks = []
        for i in range(cfg.n_blocks):
            pre = f"block{i}"
            norm1 = LayerNorm(d, dtype=dtype, name=f"{pre}.norm1")
            if cfg.arch == "vit":
                unit1 = AttentionBlock(rng, d, cfg.heads, dtype,
                                       name=f"{pre}.attn")
                unit1_params = unit1.parameters()
            elif cfg.arch == "mixer":
                pair = MixerBlockPair(rng, t, d, cfg.d_mlp, cfg.d_mlp, dtype,
                                      name=f"{pre}.mixer")
                unit1 = pair.token_forward
                unit1_params = pair.token_mlp.parameters()
            elif cfg.arch == "synthesizer":
                unit1 = SynthesizerMixer(rng, d, dtype, name=f"{pre}.synth")
                unit1_params = unit1.parameters()
            else:
                unit1 = GegluBlock(rng, d, cfg.d_mlp, cfg.stream_norm, dtype,
                                   name=f"{pre}.geglu")
                unit1_params = unit1.parameters()

            params = norm1.parameters() + unit1_params
            if cfg.arch == "activator_geglu_only":
                self.blocks.append(_Block(norm1, unit1, params=params))
                continue
            norm2 = LayerNorm(d, dtype=dtype, name=f"{pre}.norm2")
            if cfg.arch == "mixer":
                unit2 = pair.channel_mlp
            else:
                unit2 = MlpBlock(rng, d, cfg.d_mlp, dtype, name=f"{pre}.mlp")
            params += norm2.parameters() + unit2.parameters()
            self.blocks.append(_Block(norm1, unit1, norm2, unit2, params))

        self.final_norm = (LayerNorm(d, dtype=dtype, name="final_norm")
                           if cfg.final_norm else None)
        self.head = Linear(rng, d, cfg.n_classes, dtype, name="head")

    # -- forward -----------------------------------------------------------

    def forward(self, images):
        images = np.asarray(images)
        if images.shape[1:] != (3, IMAGE_SIDE, IMAGE_SIDE):
            raise ShapeError(
                f"expected images [b, 3, {IMAGE_SIDE}, {IMAGE_SIDE}], got "
                f"{images.shape}")
        return self.forward_patches(patchify(images, self.config.ps))

    def forward_patches(self, patch_vectors):
        """Forward from pre-patchified vectors [b, n_tokens, ps*ps*3]."""
        x = self.patch_embed.embed_patches(
            np.asarray(patch_vectors, dtype=self.dtype))
        if self.pos is not None:
            x = x + self.pos
        for block in self.blocks:
            x = block(x)
        if self.final_norm is not None:
            x = self.final_norm(x)
        pooled = x.mean(axis=1)
        return self.head(pooled)

    __call__ = forward

    # -- parameters --------------------------------------------------------

    def parameters(self):
        params = list(self.patch_embed.parameters())
        if self.pos is not None:
            params.append(self.pos)
        for block in self.blocks:
            params += block.params
        if self.final_norm is not None:
            params += self.final_norm.parameters()
        params += self.head.parameters()
        return params

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}

    def zero_grads(self):
        for p in self.parameters():
            p.zero_grad()

    def n_parameters(self):
        return sum(p.size for p in self.parameters())


def build(config, dtype=np.float32):
    """Deterministic model construction from a config (and its seed)."""
    return ClassifierModel(config, dtype=dtype)
