"""Exterior powers of vector spaces and linear maps.

Basis of the p-th exterior power of R^n: the strictly increasing p-tuples of
``1..n`` in lexicographic order, with ``e_I = e_{i_1} ^ ... ^ e_{i_p}``.
Tuples are 1-based everywhere in the public API.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import DegenerateInput, DomainError

MAX_DIM = 12
RANK_TOL = 1e-12


@dataclass(frozen=True)
class MultiIndexBasis:
    n: int
    p: int
    tuples: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.tuples)

    def index(self, tup) -> int:
        return self.tuples.index(tuple(tup))

    @property
    def zero_based(self) -> np.ndarray:
        """Tuples as a ``(C(n,p), p)`` integer array of 0-based indices."""
        return np.array(self.tuples, dtype=int).reshape(len(self.tuples), self.p) - 1


@dataclass(frozen=True)
class ExteriorOperator:
    basis: MultiIndexBasis
    matrix: np.ndarray


def _check_order(n, p):
    if n < 1 or n > MAX_DIM:
        raise DomainError(f"dimension n={n} outside 1..{MAX_DIM}")
    if p < 1 or p > n:
        raise DomainError(f"order p={p} outside 1..{n}")


def multi_indices(n: int, p: int) -> MultiIndexBasis:
    """Lexicographic basis of strictly increasing ``p``-tuples from ``1..n``."""
    _check_order(n, p)
    tuples = tuple(itertools.combinations(range(1, n + 1), p))
    return MultiIndexBasis(n, p, tuples)


def _square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {A.shape}")
    return A


def _minors(M, rows, cols):
    # rows: (R, p), cols: (C, p) -> (R, C) array of p x p minors
    sub = M[rows[:, None, :, None], cols[None, :, None, :]]
    return np.linalg.det(sub)


def exterior_power(A, p: int) -> ExteriorOperator:
    """The induced map on the p-th exterior power: the matrix of p x p minors."""
    A = _square(A)
    n = A.shape[0]
    basis = multi_indices(n, p)
    if p == 1:
        return ExteriorOperator(basis, A.copy())
    idx = basis.zero_based
    return ExteriorOperator(basis, _minors(A, idx, idx))


def exterior_power_batch(As, p: int) -> np.ndarray:
    """Exterior powers of a stack of ``n x n`` matrices, shape ``(m, C, C)``."""
    As = np.asarray(As, dtype=float)
    n = As.shape[-1]
    basis = multi_indices(n, p)
    if p == 1:
        return As.copy()
    idx = basis.zero_based
    sub = As[:, idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(sub)


def exterior_generator(A, p: int) -> ExteriorOperator:
    """Derivation induced by ``A``: d/dt at t=0 of the exterior power of exp(tA).

    Diagonal entries are sums of the diagonal of ``A`` over the tuple; entries
    between tuples differing in one index ``i -> j`` are ``±A[i, j]``, with
    sign given by the positions of ``i`` and ``j`` in their tuples.
    """
    A = _square(A)
    n = A.shape[0]
    basis = multi_indices(n, p)
    if p == 1:
        return ExteriorOperator(basis, A.copy())
    N = len(basis)
    L = np.zeros((N, N))
    position = {t: k for k, t in enumerate(basis.tuples)}
    for r, I in enumerate(basis.tuples):
        L[r, r] = sum(A[i - 1, i - 1] for i in I)
        for a, i in enumerate(I):
            rest = I[:a] + I[a + 1:]
            for j in range(1, n + 1):
                if j in rest or j == i:
                    continue
                J = tuple(sorted(rest + (j,)))
                b = J.index(j)
                L[r, position[J]] += (-1) ** (a + b) * A[i - 1, j - 1]
    return ExteriorOperator(basis, L)


def plane_to_pvector(vectors) -> np.ndarray:
    """Plücker coordinates of the wedge of the given vectors.

    ``vectors`` is a sequence of ``p`` vectors in R^n (rows of a ``p x n``
    array). Dependent vectors give the zero p-vector and a
    :class:`DegenerateInput` warning.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=float)).T
    n, p = V.shape
    basis = multi_indices(n, p)
    idx = basis.zero_based
    coords = np.linalg.det(V[idx])
    scale = np.prod(np.linalg.norm(V, axis=0))
    if scale == 0.0 or np.linalg.norm(coords) <= RANK_TOL * scale:
        warnings.warn("linearly dependent vectors give the zero p-vector",
                      DegenerateInput, stacklevel=2)
        return np.zeros(len(basis))
    return coords


@dataclass(frozen=True)
class InducedSplitting:
    """Splitting of the k-th exterior power induced by ``E ⊕ F``.

    Columns of ``E_tilde``/``F_tilde`` are p-vectors in the lexicographic
    basis; ``E_labels``/``F_labels`` name each column by the (1-based)
    positions it wedges from the combined list ``E_basis + F_basis``.
    """
    k: int
    E_tilde: np.ndarray
    F_tilde: np.ndarray
    E_labels: tuple
    F_labels: tuple


def induced_splitting(E_basis, F_basis, k: int) -> InducedSplitting:
    E = np.atleast_2d(np.asarray(E_basis, dtype=float))
    F = np.atleast_2d(np.asarray(F_basis, dtype=float))
    # bases are given as lists of vectors (rows)
    B = np.vstack([E, F]).T
    n = B.shape[0]
    dE = E.shape[0]
    if B.shape[1] != n:
        raise DomainError(f"{B.shape[1]} vectors do not form a basis of R^{n}")
    s = np.linalg.svd(B, compute_uv=False)
    if s[-1] <= RANK_TOL * s[0]:
        raise DomainError("E and F bases are not jointly independent")
    _check_order(n, k)
    E_cols, F_cols, E_labels, F_labels = [], [], [], []
    for combo in itertools.combinations(range(n), k):
        coords = np.linalg.det(B[:, list(combo)][multi_indices(n, k).zero_based])
        label = tuple(c + 1 for c in combo)
        if all(c >= dE for c in combo):
            F_cols.append(coords)
            F_labels.append(label)
        else:
            E_cols.append(coords)
            E_labels.append(label)
    N = comb(n, k)

    def stack(cols):
        return np.array(cols).T if cols else np.zeros((N, 0))

    return InducedSplitting(k, stack(E_cols), stack(F_cols),
                            tuple(E_labels), tuple(F_labels))
