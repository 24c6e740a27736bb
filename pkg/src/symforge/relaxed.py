"""SGD-only ablation: continuous M1/M2 trained jointly with phi.

Instead of selecting a discrete (M1, M2) arm, both matrices are relaxed to
unconstrained reals and learned by the same minibatch SGD as the embedding
and head networks.  The pipeline is

    y = M1 x;  P = all-pairs rows (y_i, y_j);  Z = M2 P;
    pooled = mean_rows eta(Z);  q = (I - M1) x;  out = mu_head([pooled; q]).

This reproduces the ablation result that joint gradient descent over the
matrices underperforms discrete selection and produces dense,
uninterpretable matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, TrainingDivergedError
from .net import (
    Dataset,
    PhiParams,
    TrainConfig,
    _mlp_backward,
    _mlp_forward,
    init_params,
)


@dataclass
class RelaxedParams:
    m1: np.ndarray  # (n, n)
    m2: np.ndarray  # (n^2, n^2)
    phi: PhiParams


def init_relaxed(n: int, p: int = 16, h: int = 32, seed: int = 0) -> RelaxedParams:
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(n)
    m1 = np.eye(n) + rng.uniform(-bound, bound, size=(n, n))
    m2 = np.eye(n * n) + rng.uniform(-bound, bound, size=(n * n, n * n)) / n
    phi = init_params(n, p=p, h=h, seed=seed + 1)
    return RelaxedParams(m1, m2, phi)


def _relaxed_front(params: RelaxedParams, X):
    """Pooled embedding and complement for a batch, plus caches."""
    m, n = X.shape
    Y = X @ params.m1.T  # (m, n)
    # All-pairs rows in row-major order: row i*n+j holds (y_i, y_j).
    P = np.stack([np.repeat(Y, n, axis=1), np.tile(Y, (1, n))], axis=2)  # (m, n^2, 2)
    Z = np.einsum("rs,msk->mrk", params.m2, P)  # (m, n^2, 2)
    flatZ = Z.reshape(m * n * n, 2)
    E, eta_caches = _mlp_forward(params.phi.eta, flatZ)
    pooled = E.reshape(m, n * n, params.phi.p).mean(axis=1)
    Q = X - Y  # (I - M1) x
    return pooled, Q, (P, eta_caches)


def forward_relaxed(params: RelaxedParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    pooled, Q, _ = _relaxed_front(params, X)
    out, _ = _mlp_forward(params.phi.mu_head, np.concatenate([pooled, Q], axis=1))
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite relaxed output")
    return out[:, 0]


def loss_and_grad_relaxed(params: RelaxedParams, X, y):
    """Mean squared loss and gradients for all relaxed parameters."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = X.shape
    s = n * n
    pooled, Q, (P, eta_caches) = _relaxed_front(params, X)
    z = np.concatenate([pooled, Q], axis=1)
    out, mu_caches = _mlp_forward(params.phi.mu_head, z)
    resid = out[:, 0] - y
    loss = float(np.mean(resid**2))
    if not np.isfinite(loss):
        raise NumericError("non-finite relaxed loss")
    dpred = (2.0 * resid / m)[:, None]

    mu_grads, dz = _mlp_backward(params.phi.mu_head, mu_caches, dpred)
    p = params.phi.p
    d_pooled = dz[:, :p] / s
    dQ = dz[:, p:]
    up = np.repeat(d_pooled, s, axis=0)
    eta_grads, dflatZ = _mlp_backward(params.phi.eta, eta_caches, up)
    dZ = dflatZ.reshape(m, s, 2)
    dM2 = np.einsum("mrk,msk->rs", dZ, P)
    dP = np.einsum("rs,mrk->msk", params.m2, dZ)
    # P row i*n+j is (y_i, y_j): scatter the two slots back onto y.
    dY = dP[:, :, 0].reshape(m, n, n).sum(axis=2) + dP[:, :, 1].reshape(
        m, n, n
    ).sum(axis=1)
    dY -= dQ  # Q = x - y
    dM1 = dY.T @ X
    dphi = PhiParams(eta_grads, mu_grads, params.phi.p, params.phi.h, params.phi.n)
    return loss, RelaxedParams(dM1, dM2, dphi)


def train_relaxed(dataset: Dataset, cfg: TrainConfig, p: int = 16, h: int = 32):
    """Joint minibatch SGD over M1, M2 and phi.  Returns (params, final loss)."""
    rng = np.random.default_rng(cfg.seed)
    params = init_relaxed(dataset.inputs.shape[1], p=p, h=h, seed=cfg.seed)
    m = len(dataset)
    last = None
    for epoch in range(cfg.epochs):
        lr = cfg.lr_initial * cfg.lr_decay**epoch
        perm = rng.permutation(m)
        for start in range(0, m, cfg.batch_size):
            sel = perm[start : start + cfg.batch_size]
            try:
                loss, grads = loss_and_grad_relaxed(
                    params, dataset.inputs[sel], dataset.targets[sel]
                )
            except NumericError:
                raise TrainingDivergedError("relaxed loss became non-finite", last)
            last = loss
            phi = params.phi
            gphi = grads.phi
            new_eta = [
                (W - lr * gW, b - lr * gb)
                for (W, b), (gW, gb) in zip(phi.eta, gphi.eta)
            ]
            new_mu = [
                (W - lr * gW, b - lr * gb)
                for (W, b), (gW, gb) in zip(phi.mu_head, gphi.mu_head)
            ]
            params = RelaxedParams(
                params.m1 - lr * grads.m1,
                params.m2 - lr * grads.m2,
                PhiParams(new_eta, new_mu, phi.p, phi.h, phi.n),
            )
    pred = forward_relaxed(params, dataset.inputs)
    final = float(np.mean((pred - dataset.targets) ** 2))
    if not np.isfinite(final):
        raise TrainingDivergedError("relaxed final loss non-finite", last)
    return params, final


def evaluate_relaxed(params: RelaxedParams, dataset: Dataset, metric="MAE") -> float:
    pred = forward_relaxed(params, dataset.inputs)
    resid = pred - dataset.targets
    if metric == "MAE":
        return float(np.mean(np.abs(resid)))
    if metric == "MSE":
        return float(np.mean(resid**2))
    raise ValueError(f"unknown metric {metric!r}")
