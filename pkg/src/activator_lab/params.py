"""Closed-form parameter counts per module, independent of the model objects.

Used by the params CLI subcommand and cross-checked in tests against the
actual tensor sizes and the checkpoint records.
"""

from .models import ARCHS


def _linear(d_in, d_out):
    return d_in * d_out + d_out


def _layernorm(d):
    return 2 * d


def _mlp(d_in, d_hidden):
    return _linear(d_in, d_hidden) + _linear(d_hidden, d_in)


def _geglu(d, h, stream_norm):
    n = 2 * _linear(d, h) + _linear(h, d)
    if stream_norm:
        n += 2 * _layernorm(h)
    return n


def block_count(config):
    """Parameter count of one residual block for the given architecture."""
    d, h, t = config.d_model, config.d_mlp, config.n_tokens
    if config.arch == "vit":
        core = 4 * _linear(d, d)
    elif config.arch == "mixer":
        core = _mlp(t, h)
    elif config.arch == "synthesizer":
        core = _linear(d, d)
    else:
        core = _geglu(d, h, config.stream_norm)
    n = _layernorm(d) + core
    if config.arch == "activator_geglu_only":
        return n
    return n + _layernorm(d) + _mlp(d, h)


def module_counts(config):
    """Ordered mapping of module name -> closed-form parameter count."""
    d = config.d_model
    counts = {"patch_embed": _linear(3 * config.ps ** 2, d)}
    if config.pos_embed:
        counts["pos_embed"] = config.n_tokens * d
    per_block = block_count(config)
    for i in range(config.n_blocks):
        counts[f"block{i}"] = per_block
    if config.final_norm:
        counts["final_norm"] = _layernorm(d)
    counts["head"] = _linear(d, config.n_classes)
    return counts


def total_count(config):
    return sum(module_counts(config).values())


def comparison_table(make_config):
    """Rows (arch, total) for all architectures under a shared config family.

    make_config maps an arch name to its ModelConfig.
    """
    return [(arch, total_count(make_config(arch))) for arch in ARCHS]
