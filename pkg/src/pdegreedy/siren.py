"""Sine-activation MLP with exact input derivatives and parameter gradients.

The network maps (t, x) to a scalar. Derivatives with respect to the
inputs are obtained by propagating truncated power-series coefficients
in x (orders 0..3) together with a first-order t tangent through every
layer; sine derivatives are closed-form, so the resulting jet is exact
to machine precision. Parameter gradients of any scalar loss over a
batch of jets come from reverse accumulation over the recorded
series computation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SirenNet:
    """Fully connected network, sine activations on hidden layers."""

    weights: list[np.ndarray]  # layer l: (fan_out, fan_in)
    biases: list[np.ndarray]   # layer l: (fan_out,)
    omega0: float

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "SirenNet":
        return SirenNet(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            omega0=self.omega0,
        )


@dataclass
class ParamGrad:
    """One entry per network parameter, same shapes as SirenNet."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]


@dataclass
class Jet:
    """Value and input derivatives of the network at one point (or batch).

    Derivatives refer to the network's own (normalized) inputs; orders
    above ``max_x_order`` are reported as zero.
    """

    u: np.ndarray
    du_dt: np.ndarray
    du_dx: np.ndarray
    d2u_dx2: np.ndarray
    d3u_dx3: np.ndarray
    max_x_order: int = 3

    def by_order(self, k: int) -> np.ndarray:
        """Spatial derivative of order k (order 0 is the value itself)."""
        return (self.u, self.du_dx, self.d2u_dx2, self.d3u_dx3)[k]


def init_siren(widths, omega0: float = 30.0, seed: int = 0) -> SirenNet:
    """Initialize with the standard sine-network weight ranges.

    First layer weights are uniform on +-1/fan_in, deeper layers on
    +-sqrt(6/fan_in)/omega0; biases start at zero. Deterministic per seed.
    """
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2:
        raise ValueError("need at least an input and an output width")
    if widths[0] != 2:
        raise ValueError(f"network takes the two inputs (t, x), got width {widths[0]}")
    if widths[-1] != 1:
        raise ValueError(f"network emits one output, got width {widths[-1]}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for layer, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        if layer == 0:
            lim = 1.0 / fan_in
        else:
            lim = np.sqrt(6.0 / fan_in) / omega0
        weights.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return SirenNet(weights=weights, biases=biases, omega0=float(omega0))


def forward(net: SirenNet, t, x):
    """Evaluate u = net(t, x); scalar or elementwise over equal-length arrays."""
    t_arr, x_arr, scalar = _broadcast_inputs(t, x)
    a = np.column_stack([t_arr, x_arr])
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        a = np.sin(net.omega0 * (a @ w.T + b))
    out = (a @ net.weights[-1].T + net.biases[-1])[:, 0]
    return float(out[0]) if scalar else out


def forward_jet(net: SirenNet, t, x, max_x_order: int = 3) -> Jet:
    """Exact jet (u, u_t, u_x, u_xx, u_xxx) at the given points."""
    jet, _ = _jet_pass(net, t, x, max_x_order, keep_cache=False)
    return jet


def forward_jet_with_cache(net: SirenNet, t, x, max_x_order: int = 3):
    """Jet plus the recorded intermediates needed by jet_backward."""
    return _jet_pass(net, t, x, max_x_order, keep_cache=True)


def loss_gradients(net: SirenNet, t, x, loss, max_x_order: int = 3):
    """Gradient of a scalar loss over the batch jets w.r.t. every parameter.

    ``loss`` maps the batch Jet to ``(value, bar)`` where ``bar`` is a Jet
    holding the partial derivatives of the value with respect to each jet
    field. Returns ``(value, ParamGrad)``; paths through the derivative
    outputs (derivatives-of-derivatives w.r.t. weights) are included.
    """
    jet, cache = _jet_pass(net, t, x, max_x_order, keep_cache=True)
    value, bar = loss(jet)
    return value, jet_backward(net, cache, bar)


# ---------------------------------------------------------------------------
# forward/backward internals

def _broadcast_inputs(t, x):
    scalar = np.isscalar(t) and np.isscalar(x)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if t_arr.shape != x_arr.shape or t_arr.ndim != 1:
        raise ValueError("t and x must be scalars or equal-length 1-d arrays")
    return t_arr, x_arr, scalar


def _sine_coeffs(omega0, z0, order):
    """Scaled derivatives of sin(omega0 * z) at z0, up to what backward needs."""
    s = np.sin(omega0 * z0)
    cz = np.cos(omega0 * z0)
    d1 = omega0 * cz
    d2 = -(omega0 ** 2) * s
    d3 = -(omega0 ** 3) * cz if order >= 2 else None
    d4 = (omega0 ** 4) * s if order >= 3 else None
    return s, d1, d2, d3, d4


def _jet_pass(net: SirenNet, t, x, order: int, keep_cache: bool):
    if order not in (1, 2, 3):
        raise ValueError(f"max_x_order must be 1, 2 or 3, got {order}")
    t_arr, x_arr, scalar = _broadcast_inputs(t, x)
    n = t_arr.shape[0]

    # c[k]: k-th Taylor coefficient in x; ct: first-order t tangent.
    c = [np.column_stack([t_arr, x_arr]),
         np.tile([0.0, 1.0], (n, 1))]
    for _ in range(2, order + 1):
        c.append(np.zeros((n, 2)))
    ct = np.tile([1.0, 0.0], (n, 1))

    cache = [] if keep_cache else None
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = [ck @ w.T for ck in c]
        z[0] = z[0] + b
        zt = ct @ w.T
        s, d1, d2, d3, d4 = _sine_coeffs(net.omega0, z[0], order)

        out = [s, d1 * z[1]]
        if order >= 2:
            out.append(d1 * z[2] + 0.5 * d2 * z[1] ** 2)
        if order >= 3:
            out.append(d1 * z[3] + d2 * z[1] * z[2] + (d3 / 6.0) * z[1] ** 3)
        outt = d1 * zt
        if keep_cache:
            cache.append((c, ct, z, zt, s, np.cos(net.omega0 * z[0])))
        c, ct = out, outt

    if keep_cache:
        cache.append((c, ct))  # inputs to the linear output layer
    w, b = net.weights[-1], net.biases[-1]
    o = [(ck @ w.T)[:, 0] for ck in c]
    o[0] = o[0] + b[0]
    ot = (ct @ w.T)[:, 0]

    zeros = np.zeros(n)
    jet = Jet(
        u=o[0],
        du_dt=ot,
        du_dx=o[1],
        d2u_dx2=2.0 * o[2] if order >= 2 else zeros,
        d3u_dx3=6.0 * o[3] if order >= 3 else zeros.copy(),
        max_x_order=order,
    )
    if scalar:
        jet = Jet(*(float(getattr(jet, f)[0]) for f in
                    ("u", "du_dt", "du_dx", "d2u_dx2", "d3u_dx3")),
                  max_x_order=order)
    return jet, cache


def jet_backward(net: SirenNet, cache, bar: Jet) -> ParamGrad:
    """Reverse accumulation from jet cotangents to parameter gradients."""
    order = bar.max_x_order
    n = np.atleast_1d(np.asarray(bar.u, dtype=float)).shape[0]

    def col(v):
        return np.atleast_1d(np.asarray(v, dtype=float)).reshape(n, 1)

    # Jet fields carry factorial factors relative to Taylor coefficients.
    bo = [col(bar.u), col(bar.du_dx)]
    if order >= 2:
        bo.append(2.0 * col(bar.d2u_dx2))
    if order >= 3:
        bo.append(6.0 * col(bar.d3u_dx3))
    bot = col(bar.du_dt)

    d_weights = [np.zeros_like(w) for w in net.weights]
    d_biases = [np.zeros_like(b) for b in net.biases]

    # Linear output layer.
    c, ct = cache[-1]
    w = net.weights[-1]
    for k, bk in enumerate(bo):
        d_weights[-1] += bk.T @ c[k]
    d_weights[-1] += bot.T @ ct
    d_biases[-1] += bo[0].sum(axis=0)
    bs = [bk @ w for bk in bo]
    bst = bot @ w

    for layer in range(len(net.weights) - 2, -1, -1):
        c, ct, z, zt, s, cz = cache[layer]
        w = net.weights[layer]
        omega0 = net.omega0
        d1 = omega0 * cz
        d2 = -(omega0 ** 2) * s
        d3 = -(omega0 ** 3) * cz
        d4 = (omega0 ** 4) * s

        bz = [None] * len(z)
        bz[0] = d1 * bs[0] + (d2 * z[1]) * bs[1] + d2 * zt * bst
        bz[1] = d1 * bs[1]
        if order >= 2:
            q2 = d2 * z[2] + 0.5 * d3 * z[1] ** 2
            bz[0] += q2 * bs[2]
            bz[1] += (d2 * z[1]) * bs[2]
            bz[2] = d1 * bs[2]
        if order >= 3:
            q3 = d2 * z[3] + d3 * z[1] * z[2] + (d4 / 6.0) * z[1] ** 3
            bz[0] += q3 * bs[3]
            bz[1] += (d2 * z[2] + 0.5 * d3 * z[1] ** 2) * bs[3]
            bz[2] += (d2 * z[1]) * bs[3]
            bz[3] = d1 * bs[3]
        bzt = d1 * bst

        for k, bk in enumerate(bz):
            d_weights[layer] += bk.T @ c[k]
        d_weights[layer] += bzt.T @ ct
        d_biases[layer] += bz[0].sum(axis=0)
        bs = [bk @ w for bk in bz]
        bst = bzt @ w

    return ParamGrad(d_weights=d_weights, d_biases=d_biases)


# ---------------------------------------------------------------------------
# checkpoint format: "siren <omega0> <w0> <w1> ..." header, then one
# parameter per line (%.17g, exact float64 round trip), weights row-major
# then bias, layer by layer.

def save_checkpoint(net: SirenNet, path) -> None:
    lines = ["siren %.17g %s" % (net.omega0, " ".join(str(w) for w in net.widths))]
    for w, b in zip(net.weights, net.biases):
        lines.extend("%.17g" % v for v in w.ravel())
        lines.extend("%.17g" % v for v in b)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> SirenNet:
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "siren" or len(header) < 4:
            raise ValueError(f"{path}: not a siren checkpoint")
        omega0 = float(header[1])
        widths = [int(v) for v in header[2:]]
        flat = np.array([float(line) for line in fh if line.strip()])
    expected = sum((widths[i] + 1) * widths[i + 1] for i in range(len(widths) - 1))
    if flat.size != expected:
        raise ValueError(
            f"{path}: expected {expected} parameters for widths {widths}, got {flat.size}"
        )
    weights, biases, pos = [], [], 0
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(flat[pos:pos + fan_in * fan_out].reshape(fan_out, fan_in))
        pos += fan_in * fan_out
        biases.append(flat[pos:pos + fan_out])
        pos += fan_out
    return SirenNet(weights=weights, biases=biases, omega0=omega0)
