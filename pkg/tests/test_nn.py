"""Neural-network kernels: forward passes against naive oracles and
analytic gradients against central finite differences."""

import numpy as np
import pytest

from ppgspoof import nn

RNG = np.random.default_rng(42)


def naive_conv_same(x, w, b):
    """Triple-loop cross-correlation with same-length zero padding."""
    out_ch, in_ch, k = w.shape
    length = x.shape[-1]
    half = k // 2
    out = np.zeros((out_ch, length))
    for o in range(out_ch):
        for i in range(length):
            acc = 0.0
            for c in range(in_ch):
                for j in range(k):
                    src = i + j - half
                    if 0 <= src < length:
                        acc += w[o, c, j] * x[c, src]
            out[o, i] = acc + b[o]
    return out


def _fd_grad(f, arr, h=1e-5):
    """Central finite differences of a scalar function wrt an array."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        ix = it.multi_index
        old = arr[ix]
        arr[ix] = old + h
        fp = f()
        arr[ix] = old - h
        fm = f()
        arr[ix] = old
        g[ix] = (fp - fm) / (2 * h)
        it.iternext()
    return g


def _check_grads(net, x, param_list, rel_tol=1e-4):
    """Compare analytic parameter and input gradients with FD on sum(out)."""
    def loss():
        return float(np.sum(net.forward(x)))

    out = net.forward(x)
    net.zero_grads()
    gx = net.backward(np.ones_like(out))
    for p, g in param_list():
        fd = _fd_grad(loss, p)
        denom = max(np.max(np.abs(fd)), 1e-8)
        assert np.max(np.abs(g - fd)) / denom < rel_tol
    fd_x = _fd_grad(loss, x)
    denom = max(np.max(np.abs(fd_x)), 1e-8)
    assert np.max(np.abs(gx - fd_x)) / denom < rel_tol


class TestConvForward:
    def test_identity_kernel(self):
        layer = nn.Conv1d(1, 1, 7, "linear", RNG)
        layer.w[...] = 0.0
        layer.w[0, 0, 3] = 1.0
        layer.b[...] = 0.0
        x = RNG.normal(size=(1, 64))
        assert np.allclose(nn.conv1d_forward(layer, x), x, atol=1e-15)

    def test_zero_kernel_constant_bias(self):
        layer = nn.Conv1d(2, 3, 5, "linear", RNG)
        layer.w[...] = 0.0
        layer.b[...] = np.array([1.0, -2.0, 0.5])
        out = nn.conv1d_forward(layer, RNG.normal(size=(2, 64)))
        assert np.allclose(out, np.array([1.0, -2.0, 0.5])[:, None])

    def test_matches_naive_oracle(self):
        for _ in range(5):
            in_ch, out_ch, k = 3, 4, 7
            layer = nn.Conv1d(in_ch, out_ch, k, "linear", RNG)
            x = RNG.normal(size=(in_ch, 30))
            got = nn.conv1d_forward(layer, x)
            want = naive_conv_same(x, layer.w, layer.b)
            assert np.max(np.abs(got - want)) < 1e-12

    def test_leaky_activation_applied(self):
        layer = nn.Conv1d(1, 1, 3, "leaky_relu", RNG)
        layer.w[...] = 0.0
        layer.w[0, 0, 1] = 1.0
        layer.b[...] = 0.0
        x = np.array([[-1.0, 2.0, -3.0, 4.0]])
        out = nn.conv1d_forward(layer, x)
        assert np.allclose(out, [[-0.2, 2.0, -0.6, 4.0]])

    def test_shape_mismatch_rejected(self):
        from ppgspoof.errors import ParameterError
        layer = nn.Conv1d(2, 1, 3, "linear", RNG)
        with pytest.raises(ParameterError):
            nn.conv1d_forward(layer, RNG.normal(size=(3, 10)))


class TestMaxPool:
    def test_forward_blocks(self):
        pool = nn.MaxPool1d(2)
        x = np.array([[[1.0, 3.0, 2.0, 2.0, -1.0, -5.0]]])
        assert np.allclose(pool.forward(x), [[[3.0, 2.0, -1.0]]])

    def test_gradient_routes_to_argmax_only(self):
        pool = nn.MaxPool1d(2)
        x = np.array([[[1.0, 3.0, 2.0, 2.0]]])  # tie in second block
        pool.forward(x)
        g = pool.backward(np.array([[[5.0, 7.0]]]))
        # first-index tie rule sends the whole gradient to position 2
        assert np.allclose(g, [[[0.0, 5.0, 7.0, 0.0]]])


class TestGradients:
    def test_conv_layer(self):
        net = nn.Sequential([nn.Conv1d(2, 3, 5, "leaky_relu", RNG)])
        x = RNG.normal(size=(2, 2, 16))
        _check_grads(net, x, net.params)

    def test_affine_layer(self):
        net = nn.Sequential([nn.Flatten(), nn.Affine(12, 4, RNG)])
        x = RNG.normal(size=(3, 1, 12))
        _check_grads(net, x, net.params)

    def test_pool_layer(self):
        net = nn.Sequential([nn.Conv1d(1, 2, 3, "linear", RNG), nn.MaxPool1d(2)])
        x = RNG.normal(size=(2, 1, 16))
        _check_grads(net, x, net.params)

    def test_two_layer_composite(self):
        net = nn.Sequential([
            nn.Conv1d(1, 4, 5, "leaky_relu", RNG),
            nn.MaxPool1d(2),
            nn.Conv1d(4, 2, 3, "leaky_relu", RNG),
            nn.Flatten(),
            nn.Affine(2 * 8, 1, RNG),
        ])
        x = RNG.normal(size=(3, 1, 16))
        _check_grads(net, x, net.params)

    def test_lstm(self):
        lstm = nn.Lstm(3, 5, RNG)
        x = RNG.normal(size=(2, 7, 3))

        def loss():
            return float(np.sum(lstm.forward(x)))

        out = lstm.forward(x)
        lstm.zero_grads()
        gx = lstm.backward(np.ones_like(out))
        for p, g in lstm.params():
            fd = _fd_grad(loss, p)
            denom = max(np.max(np.abs(fd)), 1e-8)
            assert np.max(np.abs(g - fd)) / denom < 1e-4
        fd_x = _fd_grad(loss, x)
        assert np.max(np.abs(gx - fd_x)) / max(np.max(np.abs(fd_x)), 1e-8) < 1e-4


class TestAdam:
    def test_quadratic_convergence(self):
        w = np.array([5.0, -3.0])
        grad = np.zeros_like(w)
        opt = nn.Adam([(w, grad)], lr=0.1, beta1=0.9, beta2=0.999)
        for _ in range(1500):
            grad[...] = 2 * w
            opt.step()
        assert np.max(np.abs(w)) < 1e-3

    def test_deterministic(self):
        def run():
            w = np.array([1.0])
            g = np.zeros_like(w)
            opt = nn.Adam([(w, g)], lr=0.01)
            for k in range(20):
                g[...] = np.cos(k) * w + 1
                opt.step()
            return w.copy()

        assert np.array_equal(run(), run())
