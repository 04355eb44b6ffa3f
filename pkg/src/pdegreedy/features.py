"""Feature library construction, coefficient solve, losses, error metric."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linalg import qr_least_squares
from .siren import Jet


@dataclass(frozen=True)
class DomainScales:
    """Normalization factors: t' = (t - t_min)/s_t, x' = (x - x_mid)/s_x."""

    s_t: float
    s_x: float

    def __post_init__(self):
        if self.s_t <= 0 or self.s_x <= 0:
            raise ValueError(f"scales must be positive, got {self}")


@dataclass(frozen=True)
class FeatureTerm:
    """Product of spatial-derivative powers: prod (d^k u / dx^k) ** power."""

    factors: tuple[tuple[int, int], ...]  # ((derivative order, power), ...)
    label: str = ""

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a feature term needs at least one factor")
        for order, power in self.factors:
            if not 0 <= order <= 3:
                raise ValueError(f"derivative order {order} outside 0..3")
            if power < 1:
                raise ValueError(f"power {power} must be >= 1")

    @property
    def max_order(self) -> int:
        return max(order for order, _ in self.factors)


def term(*factors, label: str = "") -> FeatureTerm:
    """Shorthand: term((0, 1), (1, 1)) is u * u_x."""
    if not label:
        names = []
        for order, power in factors:
            base = "u" if order == 0 else "u_" + "x" * order
            names.append(base if power == 1 else f"{base}^{power}")
        label = "*".join(names)
    return FeatureTerm(factors=tuple((int(o), int(p)) for o, p in factors), label=label)


@dataclass(frozen=True)
class PdeSpec:
    """Named library of right-hand-side terms, with optional true coefficients."""

    name: str
    terms: tuple[FeatureTerm, ...]
    true_p: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.true_p is not None and len(self.true_p) != len(self.terms):
            raise ValueError(
                f"{len(self.true_p)} coefficients for {len(self.terms)} terms"
            )

    @property
    def max_x_order(self) -> int:
        return max(t.max_order for t in self.terms)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.terms)


PRESETS = {
    "allen-cahn": PdeSpec(
        name="allen-cahn",
        terms=(term((0, 1)), term((0, 3)), term((2, 1))),
        true_p=(5.0, -5.0, 0.0001),
    ),
    "burgers": PdeSpec(
        name="burgers",
        terms=(term((0, 1), (1, 1)), term((2, 1))),
        true_p=(-1.0, 0.1),
    ),
    "kdv": PdeSpec(
        name="kdv",
        terms=(term((0, 1), (1, 1)), term((3, 1))),
        true_p=(-6.0, -1.0),
    ),
}


def get_pde_spec(name: str) -> PdeSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown PDE spec {name!r}; presets: {', '.join(sorted(PRESETS))}"
        ) from None


def load_pde_spec(path) -> PdeSpec:
    """Custom spec from JSON: {"name", "terms": [[[order, power], ...], ...],
    "true_p": optional list}."""
    with open(path) as fh:
        raw = json.load(fh)
    terms = tuple(term(*[(f[0], f[1]) for f in factors]) for factors in raw["terms"])
    true_p = tuple(raw["true_p"]) if raw.get("true_p") is not None else None
    return PdeSpec(name=raw.get("name", "custom"), terms=terms, true_p=true_p)


# ---------------------------------------------------------------------------
# library matrix and solve

def _scaled_derivatives(jets: Jet, spec: PdeSpec, scales: DomainScales):
    """Physical-coordinate derivative columns d^k u/dx^k = jet_k / s_x^k."""
    if jets.max_x_order < spec.max_x_order:
        raise ValueError(
            f"spec {spec.name!r} needs x-derivatives up to order {spec.max_x_order}, "
            f"jets carry order {jets.max_x_order}"
        )
    cols = {}
    for order in {o for t in spec.terms for o, _ in t.factors}:
        cols[order] = np.asarray(jets.by_order(order), dtype=float) / scales.s_x ** order
    return cols


def build_theta(jets: Jet, spec: PdeSpec, scales: DomainScales) -> np.ndarray:
    """Row per sample, column per term, chain-rule corrected to physical x."""
    derivs = _scaled_derivatives(jets, spec, scales)
    n = np.atleast_1d(np.asarray(jets.u)).shape[0]
    theta = np.empty((n, len(spec.terms)))
    for j, t in enumerate(spec.terms):
        col = np.ones(n)
        for order, power in t.factors:
            col = col * np.atleast_1d(derivs[order]) ** power
        theta[:, j] = col
    return theta


def physical_u_t(jets: Jet, scales: DomainScales) -> np.ndarray:
    """Chain-rule corrected time derivative du/dt = jet.du_dt / s_t."""
    return np.atleast_1d(np.asarray(jets.du_dt, dtype=float)) / scales.s_t


def solve_parameters(theta: np.ndarray, u_t: np.ndarray) -> np.ndarray:
    """Least-squares coefficients p minimizing ||theta p - u_t||_2."""
    return qr_least_squares(theta, u_t)


# ---------------------------------------------------------------------------
# losses

def mse_loss(u_samples, u_pred) -> float:
    u_samples = np.asarray(u_samples, dtype=float).reshape(-1)
    u_pred = np.asarray(u_pred, dtype=float).reshape(-1)
    if u_samples.size == 0:
        raise ValueError("empty batch")
    if u_samples.shape != u_pred.shape:
        raise ValueError(f"length mismatch: {u_samples.shape} vs {u_pred.shape}")
    return float(np.mean((u_samples - u_pred) ** 2))


def derivative_loss(u_t, theta, p) -> float:
    u_t = np.asarray(u_t, dtype=float).reshape(-1)
    theta = np.asarray(theta, dtype=float)
    if theta.shape[0] != u_t.shape[0]:
        raise ValueError(f"{theta.shape[0]} rows vs {u_t.shape[0]} time derivatives")
    if theta.shape[1] != np.asarray(p).shape[0]:
        raise ValueError(f"{theta.shape[1]} columns vs {np.asarray(p).shape[0]} coefficients")
    return float(np.mean((u_t - theta @ p) ** 2))


def total_loss(mse: float, deri: float, mu1: float = 1.0, mu2: float = 1.0) -> float:
    for name, mu in (("mu1", mu1), ("mu2", mu2)):
        if not 0.0 < mu <= 1.0:
            raise ValueError(f"{name} must lie in (0, 1], got {mu}")
    return mu1 * mse + mu2 * deri


def relative_error(p_truth, p_est) -> np.ndarray:
    """|truth - est| / |truth| per coefficient; NaN where truth is zero."""
    p_truth = np.asarray(p_truth, dtype=float).reshape(-1)
    p_est = np.asarray(p_est, dtype=float).reshape(-1)
    if p_truth.shape != p_est.shape:
        raise ValueError(f"length mismatch: {p_truth.shape} vs {p_est.shape}")
    out = np.full(p_truth.shape, np.nan)
    nz = p_truth != 0.0
    out[nz] = np.abs(p_truth[nz] - p_est[nz]) / np.abs(p_truth[nz])
    return out


# ---------------------------------------------------------------------------
# loss cotangents for training (p held fixed during differentiation)

def composite_loss_and_bar(jets: Jet, u_data, theta, u_t, spec: PdeSpec,
                           scales: DomainScales, p: np.ndarray,
                           mu1: float, mu2: float):
    """Losses plus d(loss)/d(jet fields) for reverse accumulation.

    ``theta`` and ``u_t`` must come from the same jets (build_theta /
    physical_u_t). The coefficient vector p is treated as a constant;
    gradients flow through the network output, the time derivative,
    and every library column.
    """
    u_data = np.asarray(u_data, dtype=float).reshape(-1)
    u = np.atleast_1d(np.asarray(jets.u, dtype=float))
    n = u.shape[0]

    mse = mse_loss(u_data, u)
    resid = u_t - theta @ p
    deri = float(np.mean(resid ** 2))

    bar_orders = {k: np.zeros(n) for k in range(4)}
    bar_orders[0] += mu1 * (2.0 / n) * (u - u_data)

    # derivative loss: d/d(u_t) and d/d(theta columns)
    e_bar = mu2 * (2.0 / n) * resid
    bar_du_dt = e_bar / scales.s_t
    derivs = _scaled_derivatives(jets, spec, scales)
    for j, t in enumerate(spec.terms):
        col_bar = -e_bar * p[j]
        for fi, (order, power) in enumerate(t.factors):
            partial = np.ones(n)
            for fj, (other_order, other_power) in enumerate(t.factors):
                d = np.atleast_1d(derivs[other_order])
                if fj == fi:
                    partial = partial * power * d ** (power - 1)
                else:
                    partial = partial * d ** other_power
            bar_orders[order] += col_bar * partial / scales.s_x ** order

    bar = Jet(
        u=bar_orders[0],
        du_dt=bar_du_dt,
        du_dx=bar_orders[1],
        d2u_dx2=bar_orders[2],
        d3u_dx3=bar_orders[3],
        max_x_order=jets.max_x_order,
    )
    return mse, deri, bar
