"""Dense tensor kernels shared by every solver in the package.

Tensors are plain ``numpy.ndarray`` objects of any order; rank-R models are
held in :class:`KruskalModel`. Two layout conventions are fixed once here and
relied on everywhere else:

* linearization is first-index-fastest (Fortran ravel order), both in the
  on-disk formats (:mod:`neurocpd.tensor_io`) and in flattened model vectors;
* the mode-``n`` unfolding orders its columns by the remaining indices in
  increasing mode order with the smallest mode fastest, so that for an
  order-3 model ``unfold(full, 0) == A @ khatri_rao(C, B).T`` holds exactly.

All kernels are pure functions of their inputs and operate in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray


@dataclass
class KruskalModel:
    """Rank-R model ``sum_r a_r outer b_r outer c_r`` held as factor matrices.

    Factor ``n`` has shape ``(I_n, R)``; all factors share the column count R.
    """

    factors: list[Array]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("KruskalModel needs at least one factor")
        self.factors = [np.asarray(f, dtype=np.float64) for f in self.factors]
        ranks = {f.shape[1] if f.ndim == 2 else -1 for f in self.factors}
        if len(ranks) != 1 or -1 in ranks:
            raise ValueError("factors must be 2-D with a common column count")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    def copy(self) -> "KruskalModel":
        return KruskalModel([f.copy() for f in self.factors])

    def full(self) -> Array:
        return kruskal_full(self)

    def is_nonnegative(self) -> bool:
        return all(f.min(initial=0.0) >= 0.0 for f in self.factors)

    def flatten(self) -> Array:
        """Concatenate the column-major vectorizations of all factors."""
        return np.concatenate([f.ravel(order="F") for f in self.factors])

    @classmethod
    def unflatten(cls, vec: Array, shape, rank: int) -> "KruskalModel":
        """Inverse of :meth:`flatten` for the given dimensions and rank."""
        vec = np.asarray(vec, dtype=np.float64)
        sizes = [dim * rank for dim in shape]
        if vec.size != sum(sizes):
            raise ValueError(f"expected vector of length {sum(sizes)}, got {vec.size}")
        out, start = [], 0
        for dim, size in zip(shape, sizes):
            out.append(vec[start : start + size].reshape((dim, rank), order="F"))
            start += size
        return cls(out)

    @classmethod
    def random(cls, shape, rank: int, rng: np.random.Generator) -> "KruskalModel":
        """I.i.d. uniform [0, 1) factors, the stock nonnegative initialization."""
        return cls([rng.random((dim, rank)) for dim in shape])


def _check_mode(ndim: int, mode: int) -> None:
    if not 0 <= mode < ndim:
        raise ValueError(f"mode {mode} out of range for order-{ndim} tensor")


def unfold(t: Array, mode: int) -> Array:
    """Mode-``n`` unfolding (matricization) of a dense tensor.

    Rows are indexed by mode ``mode``; columns by the remaining indices in
    increasing mode order, smallest mode fastest.

    Parameters
    ----------
    t:
        Input array of shape ``(I_0, ..., I_{N-1})``.
    mode:
        Mode to unfold along (0-based).

    Returns
    -------
    ndarray of shape ``(I_mode, prod_{m != mode} I_m)``.
    """
    t = np.asarray(t)
    _check_mode(t.ndim, mode)
    return np.moveaxis(t, mode, 0).reshape((t.shape[mode], -1), order="F")


def fold(m: Array, mode: int, shape) -> Array:
    """Inverse of :func:`unfold`: rebuild the tensor of the given shape."""
    shape = tuple(shape)
    _check_mode(len(shape), mode)
    rest = tuple(s for i, s in enumerate(shape) if i != mode)
    t = np.asarray(m).reshape((shape[mode],) + rest, order="F")
    return np.moveaxis(t, 0, mode)


def khatri_rao(a: Array, b: Array) -> Array:
    """Column-wise Kronecker product; column r is ``kron(a[:, r], b[:, r])``.

    The first argument varies slowest, matching the unfolding convention:
    ``unfold(full([A, B, C]), 0) == A @ khatri_rao(C, B).T``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(
            f"khatri_rao needs matching column counts, got {a.shape} and {b.shape}"
        )
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def khatri_rao_list(mats) -> Array:
    """Khatri-Rao product of several matrices, first argument slowest."""
    mats = list(mats)
    if not mats:
        raise ValueError("khatri_rao_list expects at least one matrix")
    out = mats[0]
    for m in mats[1:]:
        out = khatri_rao(out, m)
    return out


def hadamard_gram(model: KruskalModel, skip: int) -> Array:
    """Hadamard product of the factor Grams, skipping factor ``skip``.

    Equals ``K.T @ K`` for ``K`` the Khatri-Rao product of the non-skipped
    factors, but costs only R x R Gram products.
    """
    _check_mode(model.order, skip)
    out = np.ones((model.rank, model.rank))
    for n, f in enumerate(model.factors):
        if n != skip:
            out *= f.T @ f
    return out


def mttkrp(t: Array, model: KruskalModel, mode: int) -> Array:
    """Matricized-tensor times Khatri-Rao product for the given mode.

    Returns ``unfold(t, mode) @ khatri_rao(factors except mode, decreasing
    mode order)`` without materializing the Khatri-Rao matrix.
    """
    t = np.asarray(t)
    _check_mode(t.ndim, mode)
    if t.shape != model.shape:
        raise ValueError(f"tensor shape {t.shape} != model shape {model.shape}")
    if t.ndim == 3:
        a, b, c = model.factors
        if mode == 0:
            tmp = np.tensordot(t, c, axes=([2], [0]))  # (I0, I1, R)
            return np.einsum("ijr,jr->ir", tmp, b)
        if mode == 1:
            tmp = np.tensordot(t, c, axes=([2], [0]))
            return np.einsum("ijr,ir->jr", tmp, a)
        tmp = np.tensordot(t, b, axes=([1], [0]))  # (I0, I2, R)
        return np.einsum("ikr,ir->kr", tmp, a)
    # generic order-N fallback
    letters = "abcdefghijklmnop"[: t.ndim]
    operands, script = [t], letters
    for n, f in enumerate(model.factors):
        if n != mode:
            operands.append(f)
            script += f",{letters[n]}z"
    return np.einsum(script + f"->{letters[mode]}z", *operands, optimize=True)


def kruskal_full(model: KruskalModel) -> Array:
    """Dense reconstruction ``sum_r`` of the rank-1 terms of the model."""
    if model.order == 3:
        a, b, c = model.factors
        return np.tensordot(a[:, None, :] * b[None, :, :], c, axes=([2], [1]))
    letters = "abcdefghijklmnop"[: model.order]
    script = ",".join(f"{ch}z" for ch in letters) + "->" + letters
    return np.einsum(script, *model.factors, optimize=True)


def frobenius_norm(t: Array) -> float:
    """Frobenius norm of a dense tensor."""
    return float(np.linalg.norm(np.asarray(t)))


def relative_error(t: Array, model: KruskalModel) -> float:
    """``||t - full(model)||_F / ||t||_F``; the norm of ``t`` must be positive."""
    t = np.asarray(t)
    denom = frobenius_norm(t)
    if denom == 0.0:
        raise ValueError("relative_error is undefined for a zero-norm tensor")
    return frobenius_norm(t - kruskal_full(model)) / denom
