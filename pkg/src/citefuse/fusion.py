"""CCA / DCCA fitting, projection and fusion of paired (text, node) views.

CCA is solved by whitening: T = Sxx^{-1/2} Sxy Syy^{-1/2}; the singular
values of T are the canonical correlations. DCCA trains one small network
per view to maximize the total correlation of their outputs; the objective
gradient is the closed-form matrix gradient of -sum_j rho_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

import numpy as np


class FusionError(Exception):
    pass


@dataclass
class PairedViews:
    ids: list[str]
    X: np.ndarray  # n x d_x
    Y: np.ndarray  # n x d_y

    def __post_init__(self):
        if self.X.shape[0] != self.Y.shape[0] or self.X.shape[0] != len(self.ids):
            raise FusionError("views must have one row per id")
        if self.X.shape[0] < 2:
            raise FusionError("need at least two samples")


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray  # 1.0 where a feature is constant

    @classmethod
    def fit(cls, M: np.ndarray, with_scale: bool) -> "Standardizer":
        mean = M.mean(axis=0)
        if with_scale:
            scale = M.std(axis=0, ddof=1)
            scale = np.where(scale > 0, scale, 1.0)
        else:
            scale = np.ones(M.shape[1])
        return cls(mean=mean, scale=scale)

    def apply(self, M: np.ndarray) -> np.ndarray:
        return (M - self.mean) / self.scale


@dataclass
class CcaModel:
    d: int
    Wx: np.ndarray  # d_x x d
    Wy: np.ndarray  # d_y x d
    std_x: Standardizer
    std_y: Standardizer
    correlations: np.ndarray  # descending


@dataclass
class ViewNet:
    """[input -> hidden (sigmoid) -> output (linear)] fully connected net."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    activation: str = "sigmoid"  # or "linear"

    def forward(self, X: np.ndarray) -> np.ndarray:
        return self.hidden(X) @ self.W2 + self.b2

    def hidden(self, X: np.ndarray) -> np.ndarray:
        Z = X @ self.W1 + self.b1
        if self.activation == "sigmoid":
            return 1.0 / (1.0 + np.exp(-np.clip(Z, -30, 30)))
        return Z

    def params(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]


@dataclass
class DccaModel:
    net_x: ViewNet
    net_y: ViewNet
    std_x: Standardizer
    std_y: Standardizer
    reg: float
    train_log: list[float] = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.net_x.W2.shape[1]


@dataclass
class FusionStrategy:
    kind: str  # simple_concat | projected_concat | linear_combination
    alpha: float | None = None

    def __post_init__(self):
        kinds = ("simple_concat", "projected_concat", "linear_combination")
        if self.kind not in kinds:
            raise FusionError(f"unknown fusion strategy {self.kind!r}")
        if self.kind == "linear_combination":
            if self.alpha is None or not (0.0 <= self.alpha <= 1.0):
                raise FusionError("linear_combination needs alpha in [0, 1]")
        elif self.alpha is not None:
            raise FusionError(f"alpha is only valid for linear_combination")


def _inv_sqrt(S: np.ndarray, reg: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(S)
    if vals.min() <= 1e-12:
        if reg == 0.0:
            raise FusionError(
                "covariance is rank deficient; refit with reg > 0 to stabilize whitening"
            )
        vals = np.maximum(vals, 1e-12)
    return (vecs * (vals ** -0.5)) @ vecs.T


def fit_cca(
    views: PairedViews, d: int = 128, reg: float = 0.0, standardize: bool = True
) -> CcaModel:
    """Fit linear CCA by whitening + SVD.

    reg is added to the diagonals of both view covariances. Projections of
    the two views have per-component correlation rho_j (descending).
    """
    n, d_x = views.X.shape
    d_y = views.Y.shape[1]
    if d > min(d_x, d_y, n - 1):
        raise FusionError(f"d={d} exceeds min(d_x, d_y, n-1)={min(d_x, d_y, n - 1)}")
    std_x = Standardizer.fit(views.X, with_scale=standardize)
    std_y = Standardizer.fit(views.Y, with_scale=standardize)
    Xb = std_x.apply(views.X)
    Yb = std_y.apply(views.Y)

    Sxx = Xb.T @ Xb / (n - 1) + reg * np.eye(d_x)
    Syy = Yb.T @ Yb / (n - 1) + reg * np.eye(d_y)
    Sxy = Xb.T @ Yb / (n - 1)

    Kx = _inv_sqrt(Sxx, reg)
    Ky = _inv_sqrt(Syy, reg)
    U, s, Vt = np.linalg.svd(Kx @ Sxy @ Ky)
    Wx = Kx @ U[:, :d]
    Wy = Ky @ Vt[:d].T
    return CcaModel(d=d, Wx=Wx, Wy=Wy, std_x=std_x, std_y=std_y, correlations=s[:d])


def correlation_objective(
    H1: np.ndarray, H2: np.ndarray, reg: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Total-correlation loss -sum_j rho_j with closed-form gradients.

    rho_j are the singular values of the whitened cross-covariance of the
    two batches. Gradients are with respect to H1 and H2 (n x d each).
    """
    n, d = H1.shape
    if H2.shape != (n, d):
        raise FusionError("H1 and H2 must have identical shapes")
    if n < 2:
        raise FusionError("need at least two samples")
    # canonical argument order makes loss(H1, H2) == loss(H2, H1) bit-exactly
    if H1.tobytes() > H2.tobytes():
        loss, g2, g1 = correlation_objective(H2, H1, reg)
        return loss, g1, g2
    m = n - 1
    H1b = H1 - H1.mean(axis=0)
    H2b = H2 - H2.mean(axis=0)
    S11 = H1b.T @ H1b / m + reg * np.eye(d)
    S22 = H2b.T @ H2b / m + reg * np.eye(d)
    S12 = H1b.T @ H2b / m

    K1 = _inv_sqrt(S11, reg)
    K2 = _inv_sqrt(S22, reg)
    U, s, Vt = np.linalg.svd(K1 @ S12 @ K2)
    V = Vt.T

    delta12 = K1 @ U @ Vt @ K2
    delta11 = -0.5 * K1 @ U @ np.diag(s) @ U.T @ K1
    delta22 = -0.5 * K2 @ V @ np.diag(s) @ V.T @ K2
    # gradient of +sum(s); loss is the negative
    g1 = (2.0 * H1b @ delta11 + H2b @ delta12.T) / m
    g2 = (2.0 * H2b @ delta22 + H1b @ delta12) / m
    return float(-s.sum()), -g1, -g2


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _make_net(rng: np.random.Generator, d_in: int, hidden: int, d_out: int, activation: str) -> ViewNet:
    return ViewNet(
        W1=_glorot(rng, d_in, hidden),
        b1=np.zeros(hidden),
        W2=_glorot(rng, hidden, d_out),
        b2=np.zeros(d_out),
        activation=activation,
    )


class _Adam:
    def __init__(self, params: list[np.ndarray], lr: float):
        self.lr = lr
        self.b1, self.b2, self.eps = 0.9, 0.999, 1e-8
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1 ** self.t)
            vhat = v / (1 - self.b2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _net_backward(net: ViewNet, Xb: np.ndarray, dH: np.ndarray) -> list[np.ndarray]:
    A = net.hidden(Xb)
    dW2 = A.T @ dH
    db2 = dH.sum(axis=0)
    dA = dH @ net.W2.T
    if net.activation == "sigmoid":
        dZ = dA * A * (1.0 - A)
    else:
        dZ = dA
    dW1 = Xb.T @ dZ
    db1 = dZ.sum(axis=0)
    return [dW1, db1, dW2, db2]


def fit_dcca(
    views: PairedViews,
    d: int = 128,
    hidden: int = 128,
    epochs: int = 20,
    batch: int = 256,
    reg: float = 1e-4,
    lr: float = 1e-3,
    seed: int = 0,
    activation: str = "sigmoid",
    standardize: bool = True,
) -> DccaModel:
    """Jointly train both view networks on the correlation objective.

    Mini-batches are reshuffled each epoch from the run seed; the per-epoch
    train_log entry is the full-dataset objective (batch correlations are
    biased). batch must exceed d so batch covariances are estimable.
    """
    n = views.X.shape[0]
    batch = min(batch, n)
    if batch <= d:
        raise FusionError(f"batch size {batch} must exceed projection dim {d}")
    rng = np.random.default_rng(seed)
    std_x = Standardizer.fit(views.X, with_scale=standardize)
    std_y = Standardizer.fit(views.Y, with_scale=standardize)
    Xb = std_x.apply(views.X)
    Yb = std_y.apply(views.Y)

    net_x = _make_net(rng, Xb.shape[1], hidden, d, activation)
    net_y = _make_net(rng, Yb.shape[1], hidden, d, activation)
    opt_x = _Adam(net_x.params(), lr)
    opt_y = _Adam(net_y.params(), lr)

    model = DccaModel(net_x=net_x, net_y=net_y, std_x=std_x, std_y=std_y, reg=reg)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            sel = order[start : start + batch]
            if len(sel) <= d:  # drop a too-small trailing batch
                continue
            H1 = net_x.forward(Xb[sel])
            H2 = net_y.forward(Yb[sel])
            loss, g1, g2 = correlation_objective(H1, H2, reg)
            if not np.isfinite(loss):
                raise FusionError(
                    f"non-finite objective at epoch {epoch}, batch offset {start}"
                )
            opt_x.step(net_x.params(), _net_backward(net_x, Xb[sel], g1))
            opt_y.step(net_y.params(), _net_backward(net_y, Yb[sel], g2))
        full_loss, _, _ = correlation_objective(net_x.forward(Xb), net_y.forward(Yb), reg)
        model.train_log.append(full_loss)
    return model


def total_correlation(model: DccaModel, views: PairedViews) -> float:
    """Sum of canonical correlations of the projected views."""
    H1 = project(model, views.X, "x")
    H2 = project(model, views.Y, "y")
    loss, _, _ = correlation_objective(H1, H2, model.reg)
    return -loss


def project(model: CcaModel | DccaModel, view: np.ndarray, side: str) -> np.ndarray:
    """Map a raw view matrix into the shared d-dimensional space."""
    if side not in ("x", "y"):
        raise FusionError(f"side must be 'x' or 'y', got {side!r}")
    if isinstance(model, CcaModel):
        std = model.std_x if side == "x" else model.std_y
        W = model.Wx if side == "x" else model.Wy
        if view.shape[1] != W.shape[0]:
            raise FusionError(f"view has {view.shape[1]} columns, model expects {W.shape[0]}")
        return std.apply(view) @ W
    std = model.std_x if side == "x" else model.std_y
    net = model.net_x if side == "x" else model.net_y
    if view.shape[1] != net.W1.shape[0]:
        raise FusionError(f"view has {view.shape[1]} columns, model expects {net.W1.shape[0]}")
    return net.forward(std.apply(view))


def fuse(Xp: np.ndarray, Yp: np.ndarray, strategy: FusionStrategy) -> np.ndarray:
    """Combine two views per the chosen strategy.

    simple_concat takes unprojected views; the other strategies take
    same-shape projected views.
    """
    if Xp.shape[0] != Yp.shape[0]:
        raise FusionError("views must have the same number of rows")
    if strategy.kind == "simple_concat":
        return np.hstack([Xp, Yp])
    if Xp.shape != Yp.shape:
        raise FusionError(f"{strategy.kind} needs same-shape projections")
    if strategy.kind == "projected_concat":
        return np.hstack([Xp, Yp])
    return strategy.alpha * Xp + (1.0 - strategy.alpha) * Yp


# --- serialization -----------------------------------------------------------

def _write_array(f: IO[str], name: str, arr: np.ndarray) -> None:
    arr = np.atleast_2d(arr)
    f.write(f"array {name} {arr.shape[0]} {arr.shape[1]}\n")
    for row in arr:
        f.write(" ".join(repr(float(v)) for v in row) + "\n")


def _read_array(f: IO[str], expect: str) -> np.ndarray:
    head = f.readline().split()
    if len(head) != 4 or head[0] != "array" or head[1] != expect:
        raise FusionError(f"model file: expected array {expect!r}, got {head!r}")
    rows, cols = int(head[2]), int(head[3])
    out = np.empty((rows, cols))
    for i in range(rows):
        out[i] = [float(v) for v in f.readline().split()]
    return out


def save_fusion_model(model: CcaModel | DccaModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        if isinstance(model, CcaModel):
            f.write(f"citefuse-fusion cca d={model.d}\n")
            for name, arr in [
                ("mean_x", model.std_x.mean), ("scale_x", model.std_x.scale),
                ("mean_y", model.std_y.mean), ("scale_y", model.std_y.scale),
                ("Wx", model.Wx), ("Wy", model.Wy),
                ("correlations", model.correlations),
            ]:
                _write_array(f, name, arr)
        else:
            f.write(
                f"citefuse-fusion dcca reg={model.reg!r} "
                f"act_x={model.net_x.activation} act_y={model.net_y.activation}\n"
            )
            for name, arr in [
                ("mean_x", model.std_x.mean), ("scale_x", model.std_x.scale),
                ("mean_y", model.std_y.mean), ("scale_y", model.std_y.scale),
                ("W1x", model.net_x.W1), ("b1x", model.net_x.b1),
                ("W2x", model.net_x.W2), ("b2x", model.net_x.b2),
                ("W1y", model.net_y.W1), ("b1y", model.net_y.b1),
                ("W2y", model.net_y.W2), ("b2y", model.net_y.b2),
            ]:
                _write_array(f, name, arr)


def load_fusion_model(path: str | Path) -> CcaModel | DccaModel:
    with open(path, encoding="utf-8") as f:
        head = f.readline().split()
        if not head or head[0] != "citefuse-fusion":
            raise FusionError(f"{path}: not a fusion model file")
        kind = head[1]
        if kind == "cca":
            mean_x = _read_array(f, "mean_x")[0]
            scale_x = _read_array(f, "scale_x")[0]
            mean_y = _read_array(f, "mean_y")[0]
            scale_y = _read_array(f, "scale_y")[0]
            Wx = _read_array(f, "Wx")
            Wy = _read_array(f, "Wy")
            corr = _read_array(f, "correlations")[0]
            d = int(head[2].split("=")[1])
            return CcaModel(
                d=d, Wx=Wx, Wy=Wy,
                std_x=Standardizer(mean_x, scale_x),
                std_y=Standardizer(mean_y, scale_y),
                correlations=corr,
            )
        if kind == "dcca":
            opts = dict(kv.split("=") for kv in head[2:])
            mean_x = _read_array(f, "mean_x")[0]
            scale_x = _read_array(f, "scale_x")[0]
            mean_y = _read_array(f, "mean_y")[0]
            scale_y = _read_array(f, "scale_y")[0]
            net_x = ViewNet(
                W1=_read_array(f, "W1x"), b1=_read_array(f, "b1x")[0],
                W2=_read_array(f, "W2x"), b2=_read_array(f, "b2x")[0],
                activation=opts["act_x"],
            )
            net_y = ViewNet(
                W1=_read_array(f, "W1y"), b1=_read_array(f, "b1y")[0],
                W2=_read_array(f, "W2y"), b2=_read_array(f, "b2y")[0],
                activation=opts["act_y"],
            )
            return DccaModel(
                net_x=net_x, net_y=net_y,
                std_x=Standardizer(mean_x, scale_x),
                std_y=Standardizer(mean_y, scale_y),
                reg=float(opts["reg"]),
            )
        raise FusionError(f"{path}: unknown model kind {kind!r}")
