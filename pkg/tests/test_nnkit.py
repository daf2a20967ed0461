import numpy as np
import pytest
import torch
from safetensors.torch import save_file

from exceptions_handler import FormatError, ShapeError
from service.networks import IdentityNet, LinearNet, QNetwork
from service.nnkit import forward, grad, load_model, make_optimizer, optim_step, save_model, to_batch, to_frame


def test_zero_linear_model_outputs_zero():
    model = LinearNet(3, 2)
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    assert torch.equal(forward(model, torch.ones(4, 3)), torch.zeros(4, 2))


def test_identity_and_determinism():
    x = torch.rand(2, 1, 16, 16)
    model = IdentityNet()
    assert torch.equal(forward(model, x), x)
    q = QNetwork(hidden=(8,))
    assert torch.equal(forward(q, x), forward(q, x))


def test_forward_rejects_wrong_shape():
    with pytest.raises(ShapeError):
        forward(QNetwork(frame_size=16, hidden=(8,)), torch.zeros(1, 1, 8, 8))


def test_quadratic_loss_gradient_is_twice_the_parameters():
    model = LinearNet(3, 2)

    def loss(m, _):
        return sum((p ** 2).sum() for p in m.parameters())

    param_grads, _ = grad(model, loss, torch.zeros(1, 3))
    for name, p in model.named_parameters():
        torch.testing.assert_close(param_grads[name], 2 * p.detach())


def test_constant_loss_has_zero_gradients():
    model = LinearNet(3, 2)
    param_grads, input_grad = grad(model, lambda m, x: torch.tensor(1.0), torch.ones(1, 3))
    assert all(torch.count_nonzero(g) == 0 for g in param_grads.values())
    assert torch.count_nonzero(input_grad) == 0


def test_input_gradient_matches_finite_differences():
    torch.manual_seed(0)
    model = LinearNet(4, 3).double()
    x = torch.rand(1, 4, dtype=torch.float64)

    def loss(m, batch):
        return torch.tanh(m(batch)).sum()

    _, g = grad(model, loss, x)
    h = 1e-6
    for j in range(4):
        e = torch.zeros_like(x)
        e[0, j] = h
        with torch.no_grad():
            fd = (loss(model, x + e) - loss(model, x - e)) / (2 * h)
        assert abs(float(fd) - float(g[0, j])) < 1e-4


def test_zero_gradients_and_zero_learning_rate_leave_parameters():
    model = LinearNet(3, 2)
    before = {k: v.clone() for k, v in model.state_dict().items()}
    optim_step(model, {n: torch.zeros_like(p) for n, p in model.named_parameters()}, make_optimizer(model))
    for k, v in model.state_dict().items():
        assert torch.equal(v, before[k])

    param_grads, _ = grad(model, lambda m, x: m(x).sum(), torch.ones(1, 3))
    optim_step(model, param_grads, make_optimizer(model, learning_rate=0.0))
    for k, v in model.state_dict().items():
        assert torch.equal(v, before[k])


def test_adam_descends_a_quadratic():
    model = LinearNet(1, 1)

    def loss(m, x):
        return ((m(x) - 3.0) ** 2).mean()

    opt = make_optimizer(model, learning_rate=0.05)
    x = torch.ones(1, 1)
    losses = []
    for _ in range(200):
        param_grads, _ = grad(model, loss, x)
        with torch.no_grad():
            losses.append(float(loss(model, x)))
        optim_step(model, param_grads, opt)
    assert losses[-1] < 1e-2 < losses[0]


def test_save_load_roundtrip(tmp_path):
    model = QNetwork(hidden=(8,))
    path = save_model(model, tmp_path / "q.safetensors", "abc")
    loaded = load_model(path)
    x = torch.rand(10, 1, 16, 16)
    assert torch.equal(forward(model.eval(), x), forward(loaded, x))


def test_identical_models_give_identical_bytes(tmp_path):
    torch.manual_seed(3)
    a = save_model(QNetwork(hidden=(8,)), tmp_path / "a.safetensors")
    torch.manual_seed(3)
    b = save_model(QNetwork(hidden=(8,)), tmp_path / "b.safetensors")
    assert a.read_bytes() == b.read_bytes()


def test_truncated_checkpoint_is_a_format_error(tmp_path):
    path = save_model(QNetwork(hidden=(8,)), tmp_path / "q.safetensors")
    path.write_bytes(path.read_bytes()[:40])
    with pytest.raises(FormatError):
        load_model(path)


def test_version_mismatch_is_reported(tmp_path):
    path = tmp_path / "old.safetensors"
    save_file({"w": torch.zeros(1)}, str(path), metadata={"format_version": "99", "architecture": "{}"})
    with pytest.raises(FormatError) as info:
        load_model(path)
    assert info.value.context["version"] == "99"


def test_frame_batch_conversions():
    frames = np.zeros((3, 16, 16), dtype=np.float32)
    assert to_batch(frames).shape == (3, 1, 16, 16)
    assert to_batch(frames[0]).shape == (1, 1, 16, 16)
    assert to_frame(to_batch(frames[0])).shape == (16, 16)
