import math

import numpy as np
import pytest

from pdegreedy.siren import (Jet, SirenNet, forward, forward_jet, init_siren,
                             load_checkpoint, loss_gradients, save_checkpoint)


def richardson(diff, h):
    # cancels the h^2 term of a second-order central formula
    return (4.0 * diff(h) - diff(2.0 * h)) / 3.0


def single_neuron(w_t, w_x, b, w_out, b_out, omega0=30.0):
    net = init_siren((2, 1, 1), omega0=omega0, seed=0)
    net.weights[0][:] = [[w_t, w_x]]
    net.biases[0][:] = [b]
    net.weights[1][:] = [[w_out]]
    net.biases[1][:] = [b_out]
    return net


class TestInit:
    def test_deterministic(self):
        a = init_siren((2, 16, 1), seed=42)
        b = init_siren((2, 16, 1), seed=42)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_weight_ranges(self):
        net = init_siren((2, 128, 128, 1), omega0=30.0, seed=0)
        assert np.max(np.abs(net.weights[0])) <= 1.0 / 2
        lim = math.sqrt(6.0 / 128) / 30.0  # ~0.00722
        assert np.max(np.abs(net.weights[1])) <= lim
        assert lim == pytest.approx(0.00722, abs=2e-5)
        for b in net.biases:
            assert np.all(b == 0.0)

    def test_parameter_count(self):
        net = init_siren((2, 128, 128, 128, 1), seed=0)
        # 2*128+128 + 2*(128^2+128) + 128+1
        assert net.num_params == (2 * 128 + 128) + 2 * (128 ** 2 + 128) + (128 + 1)
        assert net.num_params == 33537

    def test_bad_widths(self):
        with pytest.raises(ValueError):
            init_siren((3, 8, 1))
        with pytest.raises(ValueError):
            init_siren((2, 8, 2))


class TestForward:
    def test_zero_weights_give_zero(self):
        net = init_siren((2, 8, 8, 1), seed=0)
        for w in net.weights:
            w[:] = 0.0
        assert forward(net, 0.7, -0.3) == 0.0

    def test_single_neuron_closed_form(self):
        net = single_neuron(0.4, -0.7, 0.2, 1.3, -0.1)
        t0, x0 = 0.35, 0.6
        expected = 1.3 * math.sin(30.0 * (0.4 * t0 - 0.7 * x0 + 0.2)) - 0.1
        assert forward(net, t0, x0) == pytest.approx(expected, rel=1e-14)

    def test_duplicate_implementation_oracle(self, rng):
        net = init_siren((2, 10, 7, 1), seed=9)
        t0, x0 = rng.uniform(0, 1), rng.uniform(-1, 1)
        # independent straightforward re-evaluation with plain loops
        a = [t0, x0]
        for w, b in zip(net.weights[:-1], net.biases[:-1]):
            a = [math.sin(net.omega0 * (sum(w[i, j] * a[j] for j in range(len(a)))
                                        + b[i]))
                 for i in range(w.shape[0])]
        expected = sum(net.weights[-1][0, j] * a[j] for j in range(len(a)))
        expected += net.biases[-1][0]
        assert forward(net, t0, x0) == pytest.approx(expected, rel=1e-13)

    def test_batch_matches_scalar(self, rng):
        net = init_siren((2, 8, 1), seed=2)
        t = rng.uniform(0, 1, 5)
        x = rng.uniform(-1, 1, 5)
        batch = forward(net, t, x)
        for i in range(5):
            assert batch[i] == pytest.approx(forward(net, t[i], x[i]), rel=1e-14)


class TestJets:
    def test_single_neuron_derivative_chain(self):
        omega0 = 30.0
        w_t, w_x = 0.15, -0.45
        net = single_neuron(w_t, w_x, 0.1, 1.0, 0.0, omega0)
        t0, x0 = 0.2, 0.5
        z = omega0 * (w_t * t0 + w_x * x0 + 0.1)
        jet = forward_jet(net, t0, x0, 3)
        assert jet.u == pytest.approx(math.sin(z), rel=1e-13)
        assert jet.du_dx == pytest.approx(omega0 * w_x * math.cos(z), rel=1e-13)
        assert jet.d2u_dx2 == pytest.approx(-(omega0 * w_x) ** 2 * math.sin(z), rel=1e-12)
        assert jet.d3u_dx3 == pytest.approx(-(omega0 * w_x) ** 3 * math.cos(z), rel=1e-12)
        assert jet.du_dt == pytest.approx(omega0 * w_t * math.cos(z), rel=1e-13)

    def test_finite_difference_oracle_all_orders(self, rng):
        # >= 100 random (net, point) cases per order
        h = 1e-4
        # the third-difference quotient amplifies rounding by eps/(2h^3), so
        # its step must sit at the double-precision optimum instead
        h3 = 2e-4
        worst = {1: 0.0, 2: 0.0, 3: 0.0, "t": 0.0}
        for trial in range(5):
            net = init_siren((2, 128, 128, 128, 1), seed=trial)
            t = rng.uniform(0, 1, 25)
            x = rng.uniform(-1, 1, 25)
            jet = forward_jet(net, t, x, 3)

            def f(dt=0.0, dx=0.0):
                return forward(net, t + dt, x + dx)

            fd = {
                1: richardson(lambda s: (f(dx=s) - f(dx=-s)) / (2 * s), h),
                2: richardson(lambda s: (f(dx=s) - 2 * f() + f(dx=-s)) / s ** 2, h),
                3: richardson(lambda s: (f(dx=2 * s) - 2 * f(dx=s) + 2 * f(dx=-s)
                                         - f(dx=-2 * s)) / (2 * s ** 3), h3),
                "t": richardson(lambda s: (f(dt=s) - f(dt=-s)) / (2 * s), h),
            }
            for key, ad in ((1, jet.du_dx), (2, jet.d2u_dx2),
                            (3, jet.d3u_dx3), ("t", jet.du_dt)):
                rel = np.abs(ad - fd[key]) / (np.abs(ad) + np.abs(fd[key]) + 1e-8)
                worst[key] = max(worst[key], float(rel.max()))
        for key, value in worst.items():
            assert value < 1e-5, f"order {key}: worst relative error {value}"

    def test_truncated_orders_report_zero(self, rng):
        net = init_siren((2, 12, 1), seed=1)
        t = rng.uniform(0, 1, 4)
        x = rng.uniform(-1, 1, 4)
        jet = forward_jet(net, t, x, max_x_order=1)
        assert np.all(jet.d2u_dx2 == 0.0) and np.all(jet.d3u_dx3 == 0.0)
        full = forward_jet(net, t, x, max_x_order=3)
        np.testing.assert_allclose(jet.du_dx, full.du_dx)
        np.testing.assert_allclose(jet.u, full.u)

    def test_linearity_of_parallel_sum(self, rng):
        # block-diagonal combination realizes a*G1 + b*G2 as one network
        n1 = init_siren((2, 6, 5, 1), seed=3)
        n2 = init_siren((2, 4, 3, 1), seed=4)
        a, b = 1.7, -0.6
        weights, biases = [], []
        for l in range(2):
            w1, w2 = n1.weights[l], n2.weights[l]
            if l == 0:
                w = np.vstack([w1, w2])
            else:
                w = np.block([
                    [w1, np.zeros((w1.shape[0], w2.shape[1]))],
                    [np.zeros((w2.shape[0], w1.shape[1])), w2]])
            weights.append(w)
            biases.append(np.concatenate([n1.biases[l], n2.biases[l]]))
        weights.append(np.hstack([a * n1.weights[2], b * n2.weights[2]]))
        biases.append(a * n1.biases[2] + b * n2.biases[2])
        combined = SirenNet(weights=weights, biases=biases, omega0=n1.omega0)

        t = rng.uniform(0, 1, 6)
        x = rng.uniform(-1, 1, 6)
        j1 = forward_jet(n1, t, x, 3)
        j2 = forward_jet(n2, t, x, 3)
        jc = forward_jet(combined, t, x, 3)
        for name in ("u", "du_dt", "du_dx", "d2u_dx2", "d3u_dx3"):
            np.testing.assert_allclose(
                getattr(jc, name),
                a * getattr(j1, name) + b * getattr(j2, name),
                rtol=1e-10, atol=1e-10)


class TestLossGradients:
    def test_constant_loss_zero_gradient(self, rng):
        net = init_siren((2, 6, 1), seed=0)

        def const_loss(jet):
            n = np.atleast_1d(jet.u).shape[0]
            zero = np.zeros(n)
            return 1.0, Jet(zero, zero, zero, zero, zero, jet.max_x_order)

        _, grad = loss_gradients(net, rng.uniform(0, 1, 3),
                                 rng.uniform(-1, 1, 3), const_loss)
        for g in grad.d_weights + grad.d_biases:
            assert np.all(g == 0.0)

    def test_single_neuron_hand_gradient(self):
        omega0 = 30.0
        w_t, w_x, b, w_out = 0.3, -0.2, 0.05, 0.9
        net = single_neuron(w_t, w_x, b, w_out, 0.0, omega0)
        t0, x0 = 0.4, -0.8

        def value_loss(jet):
            one = np.ones(1)
            zero = np.zeros(1)
            return float(np.atleast_1d(jet.u)[0]), Jet(one, zero, zero, zero, zero, 3)

        _, grad = loss_gradients(net, np.array([t0]), np.array([x0]), value_loss)
        z = omega0 * (w_t * t0 + w_x * x0 + b)
        cos_chain = w_out * omega0 * math.cos(z)
        assert grad.d_weights[1][0, 0] == pytest.approx(math.sin(z), rel=1e-12)
        assert grad.d_biases[1][0] == pytest.approx(1.0)
        assert grad.d_weights[0][0, 0] == pytest.approx(cos_chain * t0, rel=1e-12)
        assert grad.d_weights[0][0, 1] == pytest.approx(cos_chain * x0, rel=1e-12)
        assert grad.d_biases[0][0] == pytest.approx(cos_chain, rel=1e-12)

    def test_jet_field_gradients_vs_finite_differences(self, rng):
        # weight a mix of every jet output and check all parameter gradients
        net = init_siren((2, 7, 6, 1), seed=8)
        t = rng.uniform(0, 1, 9)
        x = rng.uniform(-1, 1, 9)
        cw = rng.standard_normal((5, 9))

        def mixed_loss(jet):
            fields = (jet.u, jet.du_dt, jet.du_dx, jet.d2u_dx2, jet.d3u_dx3)
            value = sum(float(c @ np.atleast_1d(f)) for c, f in zip(cw, fields))
            return value, Jet(*(c.copy() for c in cw), max_x_order=3)

        value, grad = loss_gradients(net, t, x, mixed_loss)

        def loss_at(net):
            jet = forward_jet(net, t, x, 3)
            return mixed_loss(jet)[0]

        h = 1e-6
        worst = 0.0
        for li in range(len(net.weights)):
            for arr, garr in ((net.weights[li], grad.d_weights[li]),
                              (net.biases[li], grad.d_biases[li])):
                flat = arr.reshape(-1)
                gflat = garr.reshape(-1)
                for idx in range(flat.size):
                    orig = flat[idx]
                    flat[idx] = orig + h
                    up = loss_at(net)
                    flat[idx] = orig - h
                    down = loss_at(net)
                    flat[idx] = orig
                    fd = (up - down) / (2 * h)
                    rel = abs(gflat[idx] - fd) / (abs(gflat[idx]) + abs(fd) + 1e-8)
                    worst = max(worst, rel)
        assert worst < 1e-4


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path):
        net = init_siren((2, 9, 5, 1), omega0=17.5, seed=6)
        path = tmp_path / "net.txt"
        save_checkpoint(net, path)
        back = load_checkpoint(path)
        assert back.omega0 == net.omega0
        assert back.widths == net.widths
        for wa, wb in zip(net.weights, back.weights):
            np.testing.assert_array_equal(wa, wb)
        for ba, bb in zip(net.biases, back.biases):
            np.testing.assert_array_equal(ba, bb)

    def test_rejects_mangled_file(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("siren 30 2 4 1\n0.5\n")
        with pytest.raises(ValueError):
            load_checkpoint(path)
        path.write_text("not-a-checkpoint\n")
        with pytest.raises(ValueError):
            load_checkpoint(path)
