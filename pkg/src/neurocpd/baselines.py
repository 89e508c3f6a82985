"""HALS and multiplicative-update baselines for nonnegative order-3 CPD.

Both work on the Gram/MTTKRP identities only; the rank-1 residual tensors of
the HALS subproblems are never formed densely, so a sweep costs O(nnz * R).
"""

from __future__ import annotations

import logging

import numpy as np

from .tensor_ops import KruskalModel, hadamard_gram, mttkrp

logger = logging.getLogger(__name__)

Array = np.ndarray

#: denominators at or below this are treated as exactly degenerate
DEGENERATE_EPS = 1e-30

_COLUMN_MTTKRP = ("ijk,j,k->i", "ijk,i,k->j", "ijk,i,j->k")


def _column_gram(factors, mode: int, r: int) -> Array:
    """Column ``r`` of the Hadamard Gram that skips ``mode``: the vector
    ``prod_{m != mode} (F_m^T f_m[:, r])`` of length R."""
    out = None
    for m, f in enumerate(factors):
        if m == mode:
            continue
        piece = f.T @ f[:, r]
        out = piece if out is None else out * piece
    return out


def hals_sweep(t: Array, model: KruskalModel, rng=None) -> KruskalModel:
    """One hierarchical ALS sweep: columns r = 1..R, factors cycled per column.

    Each column solves its rank-1 nonnegative least-squares subproblem in
    closed form against the implicit residual. A degenerate subproblem
    (vanished companion columns) collapses the column to zero when the
    residual routed to it is also null (always the case in exact
    arithmetic), and otherwise re-seeds it uniformly in [0, 1).
    """
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError("hals_sweep expects an order-3 tensor")
    if t.shape != model.shape:
        raise ValueError(f"tensor shape {t.shape} != model shape {model.shape}")
    model = model.copy()
    factors = model.factors
    for r in range(model.rank):
        for mode in range(3):
            others = [f[:, r] for m, f in enumerate(factors) if m != mode]
            m_col = np.einsum(_COLUMN_MTTKRP[mode], t, *others)
            g_col = _column_gram(factors, mode, r)
            denom = g_col[r]
            numer = m_col - factors[mode] @ g_col + factors[mode][:, r] * denom
            if denom <= DEGENERATE_EPS:
                if np.abs(numer).max(initial=0.0) <= DEGENERATE_EPS:
                    factors[mode][:, r] = 0.0
                else:
                    if rng is None:
                        rng = np.random.default_rng(0)
                    factors[mode][:, r] = rng.random(factors[mode].shape[0])
                    logger.info(
                        "hals: re-seeded degenerate column %d of factor %d", r, mode
                    )
                continue
            factors[mode][:, r] = np.maximum(numer / denom, 0.0)
    return model


def mur_sweep(t: Array, model: KruskalModel, eps: float = 1e-16) -> KruskalModel:
    """One cycle of multiplicative updates ``Z <- Z * M / (Z G + eps)``.

    Zeros are fixed points of the ratio update, so factors stay nonnegative
    and zero entries stay zero; start from a strictly positive model.
    """
    t = np.asarray(t)
    if t.shape != model.shape:
        raise ValueError(f"tensor shape {t.shape} != model shape {model.shape}")
    model = model.copy()
    for mode in range(model.order):
        factor = model.factors[mode]
        numer = mttkrp(t, model, mode)
        denom = factor @ hadamard_gram(model, mode) + eps
        model.factors[mode] = factor * numer / denom
    return model
