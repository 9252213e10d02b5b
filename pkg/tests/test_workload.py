import pytest

from monarchcim.workload import (
    MatmulLayer,
    ModelSpec,
    builtin_model,
    builtin_names,
    count_params_flops,
    enumerate_matmuls,
    monarch_dims,
    monarch_params,
)


class TestBuiltins:
    def test_names(self):
        assert builtin_names() == ["bart-large", "bert-large", "gpt2-medium"]

    def test_unknown_rejected(self):
        with pytest.raises(ValueError):
            builtin_model("bert-base")

    def test_bert_matmul_count(self):
        mms = enumerate_matmuls(builtin_model("bert-large"))
        assert len(mms) == 24 * 6

    def test_bart_adds_cross_attention(self):
        mms = enumerate_matmuls(builtin_model("bart-large"))
        assert len(mms) == 24 * 6 + 12 * 4

    def test_gpt_fused_qkv(self):
        mms = enumerate_matmuls(builtin_model("gpt2-medium"))
        assert len(mms) == 24 * 4
        fused = [m for m in mms if m.role == "QKV"]
        assert len(fused) == 24
        assert fused[0].rows == 1024 and fused[0].cols == 3072

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            ModelSpec("bad", 0, 1024, 4096, 512)


class TestMonarchDims:
    @pytest.mark.parametrize(
        "rows,cols,n,b",
        [(1024, 1024, 1024, 32), (1024, 4096, 4096, 64), (4096, 1024, 4096, 64),
         (1024, 3072, 4096, 64), (1, 1, 1, 1), (16, 16, 16, 4), (17, 5, 64, 8)],
    )
    def test_supermatrix_rule(self, rows, cols, n, b):
        assert monarch_dims(rows, cols) == (n, b)

    def test_b_is_sqrt_n(self):
        for k in range(7):
            n, b = monarch_dims(4**k, 4**k)
            assert b * b == n == 4**k


class TestCounts:
    def test_square_param_ratio(self):
        # 1024x1024 dense = 1048576 params; Monarch 2*1024*32 = 65536 (16x)
        mm = MatmulLayer(1024, 1024, "Q")
        assert monarch_params(mm) == 65536
        assert mm.rows * mm.cols // monarch_params(mm) == 16

    def test_bert_report(self):
        spec = builtin_model("bert-large")
        rep = count_params_flops(spec, "monarch")
        # per layer: 4 square (2*1024*32 each) + 2 rectangular (2*4096*64 each)
        per_layer = 4 * 2 * 1024 * 32 + 2 * 2 * 4096 * 64
        assert rep.params_monarch == 24 * per_layer
        assert rep.params_dense == 24 * (4 * 1024**2 + 2 * 1024 * 4096)
        assert rep.param_ratio > 1.0
        assert rep.flops_monarch == 2 * spec.seq_len * rep.params_monarch
        assert rep.flops_dense == 2 * spec.seq_len * rep.params_dense

    def test_dense_scheme_is_identity(self):
        rep = count_params_flops(builtin_model("bert-large"), "dense")
        assert rep.param_ratio == 1.0 and rep.flop_ratio == 1.0

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            count_params_flops(builtin_model("bert-large"), "butterfly")
