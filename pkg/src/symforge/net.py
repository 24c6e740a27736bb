"""Permutation-invariant network in sum-pooling canonical form, with SGD.

The model for one arm is
    f(x) = mu_head([ pool_rows eta(pair_row) ; complement ]),
where the pooled embedding is the mean of eta over the rows selected by M2.
The n^2 - s zero rows each contribute the input-independent constant
eta(0, 0), so mean-over-selected equals an affine reparametrization of the
all-row sum and stays inside the row-permutation-invariant class.  The
selected embeddings are summed in lexicographic order of their pair values,
which makes the output bitwise identical under any permutation of the
selected rows.

Everything is float64 numpy; gradients are hand-derived reverse mode and
checked against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, TrainingDivergedError
from .selection import SelectionPair

SQUARED = "squared"
ABSOLUTE = "absolute"


@dataclass
class Dataset:
    inputs: np.ndarray  # (m, n)
    targets: np.ndarray  # (m,)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.inputs.ndim != 2 or self.targets.shape != (self.inputs.shape[0],):
            raise ValueError("inputs must be (m, n) with m targets")
        if self.inputs.shape[0] < 1:
            raise ValueError("dataset must be non-empty")

    def __len__(self):
        return self.inputs.shape[0]


@dataclass
class TrainConfig:
    epochs: int = 400
    batch_size: int = 16
    lr_initial: float = 0.2
    lr_decay: float = 0.997
    seed: int = 0
    loss_kind: str = SQUARED

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs >= 1 required")
        if not (self.lr_initial >= 0 and 0 < self.lr_decay <= 1):
            raise ValueError("need lr >= 0 and 0 < decay <= 1")
        if self.loss_kind not in (SQUARED, ABSOLUTE):
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")


@dataclass
class PhiParams:
    """Weights of the embedding MLP (eta) and the head MLP (mu_head).

    eta: 2 -> h -> h -> p, tanh hidden, linear output.
    mu_head: (p + n) -> h -> h -> 1, tanh hidden, linear output.
    """

    eta: list  # list of (W, b)
    mu_head: list
    p: int
    h: int
    n: int

    def flat(self) -> np.ndarray:
        return np.concatenate(
            [a.ravel() for W, b in self.eta + self.mu_head for a in (W, b)]
        )

    def with_flat(self, vec: np.ndarray) -> "PhiParams":
        out_eta, out_mu = [], []
        pos = 0
        for dst, src in ((out_eta, self.eta), (out_mu, self.mu_head)):
            for W, b in src:
                w = vec[pos : pos + W.size].reshape(W.shape)
                pos += W.size
                bb = vec[pos : pos + b.size].reshape(b.shape)
                pos += b.size
                dst.append((w, bb))
        return PhiParams(out_eta, out_mu, self.p, self.h, self.n)

    def to_record(self) -> dict:
        return {
            "p": self.p,
            "h": self.h,
            "n": self.n,
            "weights": self.flat().tolist(),
        }

    @staticmethod
    def from_record(record: dict) -> "PhiParams":
        template = init_params(record["n"], record["p"], record["h"], seed=0)
        return template.with_flat(np.asarray(record["weights"], dtype=float))


def _init_mlp(dims, rng):
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(d_in)
        W = rng.uniform(-bound, bound, size=(d_in, d_out))
        b = rng.uniform(-bound, bound, size=d_out)
        layers.append((W, b))
    return layers


def init_params(n: int, p: int = 16, h: int = 32, seed: int = 0) -> PhiParams:
    rng = np.random.default_rng(seed)
    eta = _init_mlp([2, h, h, p], rng)
    mu_head = _init_mlp([p + n, h, h, 1], rng)
    return PhiParams(eta, mu_head, p, h, n)


def _mlp_forward(layers, X):
    """Tanh hidden layers, linear last layer.  Returns (output, caches)."""
    caches = []
    a = X
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        z = a @ W + b
        out = z if i == last else np.tanh(z)
        caches.append((a, out, i == last))
        a = out
    return a, caches


def _mlp_backward(layers, caches, grad_out):
    """Returns (param grads, grad wrt the MLP input)."""
    grads = [None] * len(layers)
    g = grad_out
    for i in range(len(layers) - 1, -1, -1):
        a, out, is_last = caches[i]
        if not is_last:
            g = g * (1.0 - out * out)
        W, _ = layers[i]
        grads[i] = (a.T @ g, g.sum(axis=0))
        g = g @ W.T
    return grads, g


def _front_features(params: PhiParams, sp: SelectionPair, X):
    """Pooled embedding s and complement q for a batch, plus caches."""
    m, n = X.shape
    pairs = sp.selected_pairs()
    s_count = len(pairs)
    idx_l = [a for a, _ in pairs]
    idx_r = [b for _, b in pairs]
    P = np.stack([X[:, idx_l], X[:, idx_r]], axis=2)  # (m, s, 2)
    flatP = P.reshape(m * s_count, 2)
    E, eta_caches = _mlp_forward(params.eta, flatP)
    E = E.reshape(m, s_count, params.p)
    # Fixed summation order over sorted pair values: bitwise invariant to
    # any permutation of the selected rows.
    order = np.lexsort((P[:, :, 1], P[:, :, 0]), axis=1)
    E_sorted = np.take_along_axis(E, order[:, :, None], axis=1)
    # Mean over the selected rows.  Equals the all-row sum with the constant
    # (n^2 - s) eta(0,0) contribution subtracted and rescaled, so it stays in
    # the row-permutation-invariant class while keeping the head input
    # well-scaled for any n.
    s = E_sorted.sum(axis=1) / s_count
    q = X * sp.complement_mask()
    caches = (eta_caches, s_count)
    return s, q, caches


def forward_batch(params: PhiParams, sp: SelectionPair, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite input")
    s, q, _ = _front_features(params, sp, X)
    z = np.concatenate([s, q], axis=1)
    out, _ = _mlp_forward(params.mu_head, z)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite network output")
    return out[:, 0]


def forward(params: PhiParams, sp: SelectionPair, x) -> float:
    return float(forward_batch(params, sp, np.asarray(x, dtype=float)[None, :])[0])


def loss_and_grad(params: PhiParams, sp: SelectionPair, X, y, loss_kind=SQUARED):
    """Mean loss over the batch and its gradient wrt all weights."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    m = X.shape[0]
    s, q, (eta_caches, s_count) = _front_features(params, sp, X)
    z = np.concatenate([s, q], axis=1)
    out, mu_caches = _mlp_forward(params.mu_head, z)
    pred = out[:, 0]
    resid = pred - y
    if loss_kind == SQUARED:
        loss = float(np.mean(resid**2))
        dpred = 2.0 * resid / m
    elif loss_kind == ABSOLUTE:
        loss = float(np.mean(np.abs(resid)))
        dpred = np.sign(resid) / m
    else:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    if not np.isfinite(loss):
        raise NumericError("non-finite loss")

    mu_grads, dz = _mlp_backward(params.mu_head, mu_caches, dpred[:, None])
    ds = dz[:, : params.p] / s_count  # (m, p), mean-pooling scale
    # Each selected row of a sample shares that sample's pooled gradient.
    up = np.repeat(ds, s_count, axis=0)  # (m * s, p)
    eta_grads, _ = _mlp_backward(params.eta, eta_caches, up)
    return loss, PhiParams(eta_grads, mu_grads, params.p, params.h, params.n)


def _sgd_step(params: PhiParams, grads: PhiParams, lr: float) -> PhiParams:
    eta = [(W - lr * gW, b - lr * gb) for (W, b), (gW, gb) in zip(params.eta, grads.eta)]
    mu = [
        (W - lr * gW, b - lr * gb)
        for (W, b), (gW, gb) in zip(params.mu_head, grads.mu_head)
    ]
    return PhiParams(eta, mu, params.p, params.h, params.n)


def mean_loss(params: PhiParams, sp: SelectionPair, dataset: Dataset, loss_kind):
    pred = forward_batch(params, sp, dataset.inputs)
    resid = pred - dataset.targets
    if loss_kind == SQUARED:
        return float(np.mean(resid**2))
    return float(np.mean(np.abs(resid)))


def train_sgd(
    dataset: Dataset,
    sp: SelectionPair,
    cfg: TrainConfig,
    init: PhiParams | None = None,
    p: int = 16,
    h: int = 32,
):
    """Minibatch SGD with per-epoch decayed learning rate.

    Deterministic given the seed: the parameter init and the shuffles come
    from one seeded stream.  Returns (params, final mean training loss).
    """
    rng = np.random.default_rng(cfg.seed)
    params = init if init is not None else init_params(
        dataset.inputs.shape[1], p=p, h=h, seed=cfg.seed
    )
    m = len(dataset)
    last_loss = None
    for epoch in range(cfg.epochs):
        lr = cfg.lr_initial * cfg.lr_decay**epoch
        perm = rng.permutation(m)
        for start in range(0, m, cfg.batch_size):
            sel = perm[start : start + cfg.batch_size]
            try:
                loss, grads = loss_and_grad(
                    params, sp, dataset.inputs[sel], dataset.targets[sel], cfg.loss_kind
                )
            except NumericError:
                raise TrainingDivergedError("loss became non-finite", last_loss)
            last_loss = loss
            params = _sgd_step(params, grads, lr)
    final = mean_loss(params, sp, dataset, cfg.loss_kind)
    if not np.isfinite(final):
        raise TrainingDivergedError("final loss non-finite", last_loss)
    return params, final


def gradient_check(
    params: PhiParams,
    sp: SelectionPair,
    X,
    y,
    n_coords: int = 20,
    step: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central finite-difference
    gradients over randomly chosen parameter coordinates.

    The relative error is guarded with an absolute floor: coordinates whose
    gradient is below the finite-difference resolution would otherwise
    report meaningless ratios.
    """
    rng = np.random.default_rng(seed)
    flat = params.flat()
    _, grads = loss_and_grad(params, sp, X, y)
    gflat = grads.flat()
    worst = 0.0
    for idx in rng.choice(flat.size, size=min(n_coords, flat.size), replace=False):
        bumped = flat.copy()
        bumped[idx] += step
        lp, _ = loss_and_grad(params.with_flat(bumped), sp, X, y)
        bumped[idx] -= 2 * step
        lm, _ = loss_and_grad(params.with_flat(bumped), sp, X, y)
        fd = (lp - lm) / (2 * step)
        err = abs(fd - gflat[idx]) / max(abs(fd) + abs(gflat[idx]), 1e-6)
        worst = max(worst, err)
    return worst


def train_reference_mlp(dataset: Dataset, cfg: TrainConfig, h: int = 32):
    """Plain MLP on the raw input, no invariance imposed: the symmetry-free
    reference fit.  Returns (layers, predict) with the same budget as cfg."""
    rng = np.random.default_rng(cfg.seed)
    n = dataset.inputs.shape[1]
    layers = _init_mlp([n, h, h, 1], rng)
    m = len(dataset)
    for epoch in range(cfg.epochs):
        lr = cfg.lr_initial * cfg.lr_decay**epoch
        perm = rng.permutation(m)
        for start in range(0, m, cfg.batch_size):
            sel = perm[start : start + cfg.batch_size]
            X, y = dataset.inputs[sel], dataset.targets[sel]
            out, caches = _mlp_forward(layers, X)
            resid = out[:, 0] - y
            if cfg.loss_kind == SQUARED:
                dpred = 2.0 * resid / len(sel)
            else:
                dpred = np.sign(resid) / len(sel)
            grads, _ = _mlp_backward(layers, caches, dpred[:, None])
            layers = [
                (W - lr * gW, b - lr * gb)
                for (W, b), (gW, gb) in zip(layers, grads)
            ]

    def predict(X):
        out, _ = _mlp_forward(layers, np.asarray(X, dtype=float))
        return out[:, 0]

    return layers, predict


def evaluate(params: PhiParams, sp: SelectionPair, dataset: Dataset, metric="MAE"):
    pred = forward_batch(params, sp, dataset.inputs)
    resid = pred - dataset.targets
    if metric == "MAE":
        return float(np.mean(np.abs(resid)))
    if metric == "MSE":
        return float(np.mean(resid**2))
    raise ValueError(f"unknown metric {metric!r}")
