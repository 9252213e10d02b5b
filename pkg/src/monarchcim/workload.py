"""Transformer workload description: which parameterized matmuls exist, and
parameter/FLOP accounting for dense vs Monarch schemes.

Only parameterized matmuls (attention projections and FFN) are listed;
activation-activation matmuls carry no stored weights and are excluded.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ModelSpec:
    name: str
    num_layers: int
    d_model: int
    d_ff: int
    seq_len: int
    # decoder layers that add 4 cross-attention projections each
    cross_attention_layers: int = 0
    # GPT-2 convention: Q,K,V fused into a single d_model x 3*d_model projection
    fused_qkv: bool = False

    def __post_init__(self):
        if min(self.num_layers, self.d_model, self.d_ff, self.seq_len) <= 0:
            raise ValueError("model dimensions must be positive")


@dataclass(frozen=True)
class MatmulLayer:
    rows: int
    cols: int
    role: str  # Q, K, V, O, QKV, FFN1, FFN2
    count_per_layer: int = 1


@dataclass(frozen=True)
class CountReport:
    params_dense: int
    params_monarch: int
    flops_dense: int
    flops_monarch: int

    @property
    def param_ratio(self) -> float:
        return self.params_dense / self.params_monarch if self.params_monarch else 0.0

    @property
    def flop_ratio(self) -> float:
        return self.flops_dense / self.flops_monarch if self.flops_monarch else 0.0


_BUILTINS = {
    "bert-large": ModelSpec("bert-large", 24, 1024, 4096, 512),
    "bart-large": ModelSpec(
        "bart-large", 24, 1024, 4096, 1024, cross_attention_layers=12
    ),
    "gpt2-medium": ModelSpec("gpt2-medium", 24, 1024, 4096, 1024, fused_qkv=True),
}


def builtin_model(name: str) -> ModelSpec:
    try:
        return _BUILTINS[name]
    except KeyError:
        raise ValueError(
            f"unknown model {name!r}; built-ins: {sorted(_BUILTINS)}"
        ) from None


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


def enumerate_matmuls(spec: ModelSpec) -> list[MatmulLayer]:
    """One MatmulLayer per parameterized matmul instance in the model."""
    dm, dff = spec.d_model, spec.d_ff
    out: list[MatmulLayer] = []
    for _ in range(spec.num_layers):
        if spec.fused_qkv:
            out.append(MatmulLayer(dm, 3 * dm, "QKV"))
        else:
            out.extend(MatmulLayer(dm, dm, r) for r in ("Q", "K", "V"))
        out.append(MatmulLayer(dm, dm, "O"))
        out.append(MatmulLayer(dm, dff, "FFN1"))
        out.append(MatmulLayer(dff, dm, "FFN2"))
    for _ in range(spec.cross_attention_layers):
        out.extend(MatmulLayer(dm, dm, r) for r in ("Q", "K", "V", "O"))
    return out


def monarch_dims(rows: int, cols: int) -> tuple[int, int]:
    """Supermatrix convention: (n, b) with n the next power-of-4 >= max dim."""
    n = 1
    while n < max(rows, cols):
        n *= 4
    b = 1
    while b * b < n:
        b *= 2
    assert b * b == n
    return n, b


def monarch_params(mm: MatmulLayer) -> int:
    """Stored nonzeros of the two factors: 2*n*b under the supermatrix rule."""
    n, b = monarch_dims(mm.rows, mm.cols)
    return 2 * n * b


def count_params_flops(spec: ModelSpec, scheme: str) -> CountReport:
    if scheme not in ("dense", "monarch"):
        raise ValueError(f"unknown scheme {scheme!r}")
    pd = pm = fd = fm = 0
    for mm in enumerate_matmuls(spec):
        pd += mm.rows * mm.cols
        pm += monarch_params(mm)
        fd += 2 * spec.seq_len * mm.rows * mm.cols
        n, b = monarch_dims(mm.rows, mm.cols)
        fm += 4 * spec.seq_len * n * b  # permutations counted as 0 FLOPs
    if scheme == "dense":
        return CountReport(pd, pd, fd, fd)
    return CountReport(pd, pm, fd, fm)
