"""Unigram, bigram and trigram probability tables.

``P1[i] = Pr(x1 = i)``, ``P21[i, j] = Pr(x2 = i, x1 = j)`` and the trigram
table holds ``Pr(x1, x2, x3)`` as sparse coordinates sorted by the middle
symbol, so that ``P3x1[x][i, j] = Pr(x3 = i, x2 = x, x1 = j)`` can be streamed
one slice at a time without materialising a ``v^3`` array.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .hmm import Hmm, TripleSample, exact_trigram_tensor

DENSE_BIGRAM_LIMIT = 4000
_CHUNK = 1 << 16


@dataclass(frozen=True)
class TrigramTable:
    """Sparse ``Pr(x1, x2, x3)`` with entries grouped by ``x2``."""

    v: int
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    p: np.ndarray

    @classmethod
    def from_coords(cls, v, x1, x2, x3, p):
        x1, x2, x3 = (np.asarray(a, dtype=np.int64) for a in (x1, x2, x3))
        p = np.asarray(p, dtype=float)
        order = np.lexsort((x1, x3, x2))
        return cls(v, x1[order], x2[order], x3[order], p[order])

    @classmethod
    def from_dense(cls, P: np.ndarray):
        """Build from a dense array indexed ``[x1, x2, x3]``."""
        x1, x2, x3 = np.nonzero(P)
        return cls.from_coords(P.shape[0], x1, x2, x3, P[x1, x2, x3])

    @property
    def nnz(self) -> int:
        return self.p.size

    @property
    def total(self) -> float:
        return float(self.p.sum())

    def slice(self, x: int) -> np.ndarray:
        """Dense ``P3x1[x]``, shape (v, v), indexed ``[x3, x1]``."""
        lo, hi = np.searchsorted(self.x2, [x, x + 1])
        out = np.zeros((self.v, self.v))
        np.add.at(out, (self.x3[lo:hi], self.x1[lo:hi]), self.p[lo:hi])
        return out

    def dense(self) -> np.ndarray:
        """All slices stacked, shape (v, v, v), indexed ``[x2, x3, x1]``."""
        out = np.zeros((self.v,) * 3)
        np.add.at(out, (self.x2, self.x3, self.x1), self.p)
        return out

    def contract(self, A: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
        """``R[i, k, j] = sum p(x1, x2, x3) A[x3, i] B[x1, k] C[x2, j]``."""
        R = np.zeros((A.shape[1], B.shape[1], C.shape[1]))
        for lo in range(0, self.nnz, _CHUNK):
            s = slice(lo, lo + _CHUNK)
            left = (self.p[s, None] * A[self.x3[s]])[:, :, None] * B[self.x1[s]][:, None, :]
            R += np.tensordot(left, C[self.x2[s]], axes=(0, 0))
        return R

    def sliced_products(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """``S[x, i, k] = (A^T P3x1[x] B)[i, k]`` for every middle symbol, shape (v, a, b)."""
        out = np.empty((self.v, A.shape[1], B.shape[1]))
        a3 = A[self.x3]
        b1 = B[self.x1]
        for i in range(A.shape[1]):
            w = self.p * a3[:, i]
            for k in range(B.shape[1]):
                out[:, i, k] = np.bincount(self.x2, weights=w * b1[:, k], minlength=self.v)
        return out


@dataclass(frozen=True)
class JointDistributions:
    """Population or empirical ``P1``, ``P21`` and ``P3x1``."""

    P1: np.ndarray
    P21: np.ndarray | sp.sparray
    P3: TrigramTable

    @property
    def v(self) -> int:
        return self.P1.shape[0]

    def P21_dense(self) -> np.ndarray:
        return self.P21.toarray() if sp.issparse(self.P21) else np.asarray(self.P21)

    def P3x1(self, x: int) -> np.ndarray:
        return self.P3.slice(x)

    def project_bigram(self, W: np.ndarray) -> np.ndarray:
        """``W^T P21 W``."""
        return W.T @ np.asarray(self.P21 @ W)


def bigram_matrix(v, x2, x1, values):
    """Bigram table ``[x2, x1]``; sparse above ``DENSE_BIGRAM_LIMIT`` symbols."""
    if v > DENSE_BIGRAM_LIMIT:
        return sp.csr_array(sp.coo_array((values, (x2, x1)), shape=(v, v)))
    out = np.zeros((v, v))
    np.add.at(out, (np.asarray(x2), np.asarray(x1)), values)
    return out


def exact_joint_distributions(hmm: Hmm) -> JointDistributions:
    """Population tables straight from ``(T, O, pi)``."""
    P1 = hmm.O @ hmm.pi
    P21 = hmm.O @ hmm.T @ np.diag(hmm.pi) @ hmm.O.T
    return JointDistributions(P1, P21, TrigramTable.from_dense(exact_trigram_tensor(hmm)))


def exact_trigram_slice(hmm: Hmm, x: int) -> np.ndarray:
    """Closed form ``O T diag(O^T delta_x) T diag(pi) O^T``."""
    return hmm.O @ hmm.T @ np.diag(hmm.O[x]) @ hmm.T @ np.diag(hmm.pi) @ hmm.O.T


def trigram_counts(triples: np.ndarray, v: int):
    """Unique ``(x1, x2, x3)`` rows of an (N, 3) array and their integer counts."""
    triples = np.asarray(triples, dtype=np.int64)
    if np.any(triples >= v):
        raise IndexError(f"symbol index >= v={v} in sample")
    keys = (triples[:, 0] * v + triples[:, 1]) * v + triples[:, 2]
    uniq, counts = np.unique(keys, return_counts=True)
    x3 = uniq % v
    x2 = (uniq // v) % v
    x1 = uniq // (v * v)
    return x1, x2, x3, counts


def distributions_from_trigram_counts(x1, x2, x3, counts, v: int) -> JointDistributions:
    """Normalise integer trigram counts; lower orders are its marginals."""
    counts = np.asarray(counts)
    N = counts.sum()
    if N <= 0:
        raise ValueError("no mass in trigram counts")
    uni = np.bincount(x1, weights=counts, minlength=v)
    bkeys = np.asarray(x2) * v + np.asarray(x1)
    bu, binv = np.unique(bkeys, return_inverse=True)
    bc = np.bincount(binv, weights=counts)
    P21 = bigram_matrix(v, bu // v, bu % v, bc / N)
    return JointDistributions(uni / N, P21, TrigramTable.from_coords(v, x1, x2, x3, counts / N))


def empirical_joint_distributions(sample: TripleSample, v: int) -> JointDistributions:
    """Count-normalised tables from ``N`` triples (each order divided by ``N``)."""
    return distributions_from_trigram_counts(*trigram_counts(sample.triples, v), v)


def distributions_from_dense_counts(counts: np.ndarray) -> JointDistributions:
    """Same as :func:`empirical_joint_distributions` for a (v, v, v) count array."""
    x1, x2, x3 = np.nonzero(counts)
    return distributions_from_trigram_counts(x1, x2, x3, counts[x1, x2, x3], counts.shape[0])
