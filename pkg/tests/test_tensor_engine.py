"""
张量引擎测试
"""
import numpy as np
import pytest

from config.experiment import ModelConfig
from conftest import numeric_gradient
from core.errors import ContractError, DegenerateBatchError, ParseError, ShapeError
from core.models import MaskedBatch
from models import build_model
from tensor_engine import Tape, Tensor, backward
from tensor_engine.checkpoint import load_tensors, save_tensors
from tensor_engine.ops import gelu, layer_norm, log_sigmoid, masked_cross_entropy, softmax, take_rows
from tensor_engine.optim import adam_step, init_adam_state
from tensor_engine.tensor import matmul
from training.batching import build_bpr_batch, build_shifted_batch, sample_shifted_negatives
from training.objectives import masked_item_loss, mf_bpr_loss, shifted_sampled_bce_loss, shifted_softmax_loss


class TestMatmul:
    """矩阵乘法测试"""

    def test_hand_multiplication(self):
        """测试 2x2 矩阵乘积"""
        out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[5.0, 6.0], [7.0, 8.0]]))
        np.testing.assert_allclose(out.data, [[19.0, 22.0], [43.0, 50.0]])

    def test_identity(self):
        """测试 I·A = A"""
        a = np.arange(6.0).reshape(2, 3)
        np.testing.assert_allclose(matmul(Tensor(np.eye(2)), Tensor(a)).data, a)

    def test_inner_dimension_mismatch(self):
        """测试内维不一致时报错"""
        with pytest.raises(ShapeError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_gradient_matches_finite_differences(self, float64):
        """测试 sum(A·B) 对 A 的梯度与中心差分一致"""
        rng = np.random.default_rng(0)
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4, 2)))
        with Tape() as tape:
            loss = (a @ b).sum()
        backward(loss, tape)

        numeric = numeric_gradient(lambda: float((a.data @ b.data).sum()), a.data)
        np.testing.assert_allclose(a.grad, numeric, rtol=1e-4, atol=1e-8)


class TestOps:
    """算子数值测试"""

    def test_softmax_examples(self):
        """测试 softmax 的对称、解析与防溢出样例"""
        np.testing.assert_allclose(softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])
        np.testing.assert_allclose(softmax(Tensor([np.log(2.0), 0.0])).data, [2 / 3, 1 / 3], rtol=1e-6)
        out = softmax(Tensor([1000.0, 0.0])).data
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [1.0, 0.0])

    def test_layer_norm_examples(self):
        """测试 [1,3] 标准化为 [-1,1]，常数行为全零"""
        out = layer_norm(Tensor([[1.0, 3.0], [2.0, 2.0]]), Tensor([1.0, 1.0]), Tensor([0.0, 0.0]), eps=0.0)
        np.testing.assert_allclose(out.data, [[-1.0, 1.0], [0.0, 0.0]])

    def test_gelu_examples(self):
        """测试 gelu(0)=0、gelu(1)=0.84134、gelu(x)-gelu(-x)=x"""
        assert gelu(Tensor([0.0])).data[0] == 0.0
        assert gelu(Tensor([1.0])).data[0] == pytest.approx(0.84134, abs=1e-5)
        x = np.array([-2.0, -0.5, 0.3, 1.7])
        np.testing.assert_allclose(gelu(Tensor(x)).data - gelu(Tensor(-x)).data, x, rtol=1e-6)

    def test_cross_entropy_uniform_logits(self):
        """测试 logits [0,0] 的交叉熵为 ln 2"""
        loss = masked_cross_entropy(Tensor([[0.0, 0.0]]), np.array([0]), np.array([True]))
        assert loss.item() == pytest.approx(np.log(2.0), rel=1e-6)

    def test_cross_entropy_large_margin(self):
        """测试目标 logit 远大于其他时损失趋于 0"""
        loss = masked_cross_entropy(Tensor([[500.0, 0.0, 0.0]]), np.array([0]), np.array([True]))
        assert loss.item() == pytest.approx(0.0, abs=1e-6)

    def test_cross_entropy_ignores_inactive_positions(self, float64):
        """测试遮掉一半位置后，求和贡献只来自 active 位置"""
        rng = np.random.default_rng(1)
        logits = rng.normal(size=(4, 5))
        targets = np.array([0, 1, 2, 3])
        full = masked_cross_entropy(Tensor(logits), targets, np.ones(4, dtype=bool)).item() * 4
        active = np.array([True, False, True, False])
        half = masked_cross_entropy(Tensor(logits), targets, active).item() * 2

        log_probs = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
        per_position = -log_probs[np.arange(4), targets]
        assert full == pytest.approx(per_position.sum(), rel=1e-9)
        assert half == pytest.approx(per_position[active].sum(), rel=1e-9)

    def test_cross_entropy_without_active_positions(self):
        """测试没有 active 位置时报错"""
        with pytest.raises(DegenerateBatchError):
            masked_cross_entropy(Tensor([[0.0, 1.0]]), np.array([0]), np.array([False]))

    def test_log_sigmoid_is_stable(self):
        """测试极端输入下 ln σ(x) 仍为有限值"""
        out = log_sigmoid(Tensor([-1000.0, 0.0, 1000.0])).data
        np.testing.assert_allclose(out, [-1000.0, -np.log(2.0), 0.0], rtol=1e-6)


class TestGradients:
    """各算子的梯度检查（64 位）"""

    @pytest.mark.parametrize("op", ["softmax", "layer_norm", "gelu", "log_sigmoid", "take_rows"])
    def test_op_gradient(self, float64, op):
        """测试解析梯度与中心差分一致"""
        rng = np.random.default_rng(2)
        x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        weights = rng.normal(size=(3, 4))
        gain = Tensor(rng.normal(size=4))
        bias = Tensor(rng.normal(size=4))
        ids = np.array([[0, 2, 2], [1, 0, 2]])

        def forward():
            if op == "softmax":
                return softmax(x, axis=-1) * weights
            if op == "layer_norm":
                return layer_norm(x, gain, bias) * weights
            if op == "gelu":
                return gelu(x) * weights
            if op == "log_sigmoid":
                return log_sigmoid(x) * weights
            return take_rows(x, ids) * rng_rows

        rng_rows = np.random.default_rng(3).normal(size=(2, 3, 4))
        with Tape() as tape:
            loss = forward().sum()
        backward(loss, tape)

        numeric = numeric_gradient(lambda: float(forward().sum().data), x.data)
        np.testing.assert_allclose(x.grad, numeric, rtol=1e-4, atol=1e-7)


class TestBackward:
    """反向传播测试"""

    def test_sum_gradient_is_ones(self):
        """测试 loss = sum(W) 的梯度全为 1"""
        w = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        with Tape() as tape:
            loss = w.sum()
        leaves = backward(loss, tape)
        np.testing.assert_allclose(w.grad, np.ones((2, 3)))
        assert leaves == [w]

    def test_shared_parameter_accumulates(self):
        """测试同一参数被使用两次时梯度为两条路径之和"""
        w = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            loss = w.sum() + (w * 3.0).sum()
        backward(loss, tape)
        np.testing.assert_allclose(w.grad, [4.0, 4.0])

    def test_non_scalar_loss(self):
        """测试非标量损失报错"""
        w = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            out = w * 2.0
        with pytest.raises(ContractError):
            backward(out, tape)

    def test_disconnected_loss(self):
        """测试与参数不连通的损失报错"""
        with Tape() as tape:
            loss = Tensor([1.0, 2.0]).sum()
        with pytest.raises(ContractError):
            backward(loss, tape)

    def test_no_graph_outside_tape(self):
        """测试 Tape 之外不记录计算图"""
        w = Tensor([1.0], requires_grad=True)
        out = w * 2.0
        assert not out.requires_grad
        assert out.is_leaf

    @pytest.mark.parametrize("kind", ["bert4rec", "albert4rec", "deberta4rec"])
    def test_transformer_loss_gradient(self, float64, kind):
        """测试完整编码器的遮盖损失梯度与中心差分一致（关闭 dropout）"""
        config = ModelConfig(kind=kind, max_seq_len=5, hidden_size=4, num_blocks=2, num_heads=2, dropout=0.0)
        model = build_model(config, vocab_size=6, seed=0).train()
        mask_id = model.mask_id
        batch = MaskedBatch(
            inputs=np.array([[0, 1, mask_id, 3, mask_id], [2, 4, 5, mask_id, 6]]),
            labels=np.array([[0, 0, 2, 0, 4], [0, 0, 0, 1, 0]]),
            active=np.array([[False, False, True, False, True], [False, False, False, True, False]]),
        )
        with Tape() as tape:
            loss = masked_item_loss(model, batch)
        model.zero_grad()
        backward(loss, tape)

        params = model.parameters()
        names = ["item_embeddings", "blocks.0.query.weight", "blocks.1.ffn_in.weight", "final_norm.gain"]
        if kind == "deberta4rec":
            names.append("relative_embeddings")
        if kind == "albert4rec":
            names = [n.replace("blocks.1", "blocks.0") for n in names] + ["embedding_projection"]
        for name in names:
            param = params[name]
            numeric = numeric_gradient(lambda: masked_item_loss(model, batch).item(), param.data)
            np.testing.assert_allclose(param.grad, numeric, rtol=1e-3, atol=1e-7, err_msg=name)

    @pytest.mark.parametrize("strategy", ["full_softmax", "one_uniform_negative"])
    def test_shifted_loss_gradient(self, float64, strategy):
        """测试 SASRec 右移损失（全 softmax 与采样 BCE）的梯度与中心差分一致"""
        config = ModelConfig(kind="sasrec", max_seq_len=8, hidden_size=8, num_blocks=2, num_heads=2, dropout=0.0)
        model = build_model(config, vocab_size=10, seed=0).train()
        sequences = [[1, 2, 3, 4, 5], [6, 7, 8, 6, 7, 8, 9]]
        inputs, targets, active = build_shifted_batch(sequences, 8)
        negatives = sample_shifted_negatives(sequences, targets, 10, np.random.default_rng(0))

        def loss_fn():
            if strategy == "full_softmax":
                return shifted_softmax_loss(model, inputs, targets, active)
            return shifted_sampled_bce_loss(model, inputs, targets, negatives, active)

        with Tape() as tape:
            loss = loss_fn()
        model.zero_grad()
        backward(loss, tape)

        params = model.parameters()
        names = ["item_embeddings", "position_embeddings", "blocks.0.key.weight", "blocks.1.ffn_out.weight",
                 "output_bias"]
        for name in names:
            param = params[name]
            numeric = numeric_gradient(lambda: loss_fn().item(), param.data)
            np.testing.assert_allclose(param.grad, numeric, rtol=1e-3, atol=1e-7, err_msg=name)

    def test_bpr_loss_gradient(self, float64):
        """测试 MF-BPR 损失对用户因子、物品因子与偏置的梯度"""
        config = ModelConfig(kind="mf_bpr", latent_dim=4)
        model = build_model(config, vocab_size=10, seed=0, users=["a", "b", "c"]).train()
        model.parameters()["item_bias"].data[:] = np.random.default_rng(1).normal(size=10)
        train = {"a": [1, 2, 3], "b": [4, 5], "c": [6, 7, 8, 9]}
        user_rows, positives, negatives = build_bpr_batch(
            list(train), train, model.user_index, 10, np.random.default_rng(0)
        )
        with Tape() as tape:
            loss = mf_bpr_loss(model, user_rows, positives, negatives)
        model.zero_grad()
        backward(loss, tape)

        for name, param in model.parameters().items():
            numeric = numeric_gradient(lambda: mf_bpr_loss(model, user_rows, positives, negatives).item(), param.data)
            np.testing.assert_allclose(param.grad, numeric, rtol=1e-3, atol=1e-7, err_msg=name)

    def test_shared_blocks_sum_unrolled_gradients(self, float64):
        """测试 ALBERT 共享层的梯度等于同权重、不共享模型各层梯度之和"""
        shared = build_model(
            ModelConfig(kind="albert4rec", max_seq_len=6, hidden_size=8, num_blocks=2, num_heads=2, dropout=0.0),
            vocab_size=10,
            seed=0,
        ).train()
        unrolled = build_model(
            ModelConfig(kind="bert4rec", max_seq_len=6, hidden_size=8, embedding_size=16, num_blocks=2,
                        num_heads=2, dropout=0.0),
            vocab_size=10,
            seed=1,
        ).train()
        state = shared.state_dict()
        for name in [n for n in state if n.startswith("blocks.0.")]:
            state[name.replace("blocks.0.", "blocks.1.", 1)] = state[name].copy()
        unrolled.load_state_dict(state)

        mask_id = shared.mask_id
        batch = MaskedBatch(
            inputs=np.array([[0, 1, mask_id, 3, 4, mask_id], [2, 4, 5, mask_id, 6, 7]]),
            labels=np.array([[0, 0, 2, 0, 0, 5], [0, 0, 0, 1, 0, 0]]),
            active=np.array([[False, False, True, False, False, True], [False, False, False, True, False, False]]),
        )
        for model in (shared, unrolled):
            with Tape() as tape:
                loss = masked_item_loss(model, batch)
            model.zero_grad()
            backward(loss, tape)

        shared_params = shared.parameters()
        unrolled_params = unrolled.parameters()
        for name, param in shared_params.items():
            if name.startswith("blocks.0."):
                expected = unrolled_params[name].grad + unrolled_params[name.replace("blocks.0.", "blocks.1.", 1)].grad
            else:
                expected = unrolled_params[name].grad
            np.testing.assert_allclose(param.grad, expected, rtol=1e-9, atol=1e-12, err_msg=name)


class TestAdam:
    """Adam 优化器测试"""

    def test_first_step_magnitude(self):
        """测试第一步 g=1 时更新量约为 lr"""
        p = Tensor(np.zeros(3), requires_grad=True)
        state = init_adam_state({"p": p}, lr=0.01)
        adam_step({"p": p}, {"p": np.ones(3)}, state)
        np.testing.assert_allclose(p.data, -0.01 / (1 + 1e-8), rtol=1e-5)
        assert state.t == 1

    def test_zero_gradient_leaves_parameters(self):
        """测试零梯度时参数不变"""
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        state = init_adam_state({"p": p})
        adam_step({"p": p}, {"p": np.zeros(2)}, state)
        np.testing.assert_allclose(p.data, [1.0, -2.0])

    def test_two_steps_move_against_gradient(self):
        """测试常数梯度下连续两步单调反向移动"""
        p = Tensor(np.zeros(2), requires_grad=True)
        state = init_adam_state({"p": p}, lr=0.1)
        g = np.array([1.0, -1.0])
        adam_step({"p": p}, {"p": g}, state)
        first = p.data.copy()
        adam_step({"p": p}, {"p": g}, state)
        assert np.all(np.sign(first) == -np.sign(g))
        assert np.all(np.abs(p.data) > np.abs(first))

    def test_gradient_shape_mismatch(self):
        """测试梯度形状不一致时报错"""
        p = Tensor(np.zeros(2), requires_grad=True)
        with pytest.raises(ShapeError):
            adam_step({"p": p}, {"p": np.zeros(3)}, init_adam_state({"p": p}))


class TestCheckpoint:
    """检查点读写测试"""

    def test_save_and_load(self, tmp_path):
        """测试保存后逐位读回"""
        arrays = {
            "w": np.arange(6, dtype=np.float32).reshape(2, 3),
            "b": np.array([0.5, -1.25], dtype=np.float64),
            "ids": np.array([3, 1], dtype=np.int64),
        }
        loaded = load_tensors(save_tensors(tmp_path / "m.ckpt", arrays))
        assert set(loaded) == set(arrays)
        for name, value in arrays.items():
            assert loaded[name].dtype == value.dtype
            np.testing.assert_array_equal(loaded[name], value)

    def test_corrupt_file(self, tmp_path):
        """测试损坏的文件报 ParseError"""
        path = save_tensors(tmp_path / "m.ckpt", {"w": np.ones((4, 4), dtype=np.float32)})
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(ParseError):
            load_tensors(path)
        path.write_bytes(b"nope")
        with pytest.raises(ParseError):
            load_tensors(path)
