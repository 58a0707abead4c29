"""Projected moments ``mu``, ``Sigma``, ``K`` and the scalars Lambda and sigma_m.

With ``y = U^T delta_x`` the moments are ``mu = E y1``, ``Sigma = E y2 y1^T``
and ``K(a) = E[y3 y1^T (y2 . a)]``.  ``kappa[:, :, j]`` holds ``K(e_j)``, so
``K(a) = kappa @ a``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import JointDistributions, empirical_joint_distributions
from .hmm import Hmm, TripleSample

SINGULAR_RTOL = 1e-10


class SingularMomentError(np.linalg.LinAlgError):
    """Raised when ``Sigma`` is too close to singular to invert."""

    def __init__(self, sigma_min: float, tol: float):
        self.sigma_min = sigma_min
        self.tol = tol
        super().__init__(f"Sigma is singular: sigma_min={sigma_min:.3g} <= tol={tol:.3g}")


class StructuralZeroWarning(UserWarning):
    """Lambda is zero because some moment entry is exactly zero."""


@dataclass(frozen=True)
class Projection:
    """A ``v x m`` matrix mapping symbols to ``y = U^T delta_x``.

    ``kind`` is ``"orthonormal-SVD"``, ``"rescaled"``, ``"weighted"`` or
    ``"custom"``.
    """

    U: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        U = np.array(self.U, dtype=float)
        if U.ndim != 2:
            raise ValueError(f"projection must be 2-d, got shape {U.shape}")
        U.setflags(write=False)
        object.__setattr__(self, "U", U)

    @property
    def v(self) -> int:
        return self.U.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[1]

    def embed(self, x: int) -> np.ndarray:
        return self.U[x]

    def rotate(self, R: np.ndarray) -> "Projection":
        return Projection(self.U @ R, self.kind)


def as_projection(U) -> Projection:
    return U if isinstance(U, Projection) else Projection(U)


def range_residual(U, O: np.ndarray) -> float:
    """``max |O - U U^+ O|``: zero iff ``range(O)`` lies inside ``range(U)``."""
    U = as_projection(U).U
    coef, *_ = np.linalg.lstsq(U, O, rcond=None)
    return float(np.max(np.abs(O - U @ coef)))


@dataclass(frozen=True)
class MomentSet:
    mu: np.ndarray
    sigma: np.ndarray
    kappa: np.ndarray
    provenance: str = "exact"
    N: Optional[int] = None

    @property
    def m(self) -> int:
        return self.mu.shape[0]

    def K(self, a: np.ndarray) -> np.ndarray:
        return self.kappa @ np.asarray(a, dtype=float)

    def max_abs_diff(self, other: "MomentSet") -> float:
        return max(
            float(np.max(np.abs(self.mu - other.mu))),
            float(np.max(np.abs(self.sigma - other.sigma))),
            float(np.max(np.abs(self.kappa - other.kappa))),
        )


def _check_dims(U: np.ndarray, v: int, m: Optional[int] = None):
    if U.shape[0] != v:
        raise ValueError(f"projection has {U.shape[0]} rows, expected v={v}")
    if m is not None and U.shape[1] != m:
        raise ValueError(f"projection has {U.shape[1]} columns, expected m={m}")


def exact_moments(hmm: Hmm, U) -> MomentSet:
    """Population moments from the closed forms in ``T``, ``O``, ``U`` and ``pi``."""
    U = as_projection(U).U
    _check_dims(U, hmm.v)
    UO = U.T @ hmm.O
    right = hmm.T @ np.diag(hmm.pi) @ UO.T
    mu = UO @ hmm.pi
    sigma = UO @ right
    OU = hmm.O.T @ U
    kappa = np.stack(
        [UO @ hmm.T @ np.diag(OU[:, j]) @ right for j in range(U.shape[1])],
        axis=2,
    )
    return MomentSet(mu, sigma, kappa, "exact", None)


def moments_from_distributions(dists: JointDistributions, U, provenance: str = "empirical",
                               N: Optional[int] = None, kappa_order: str = "y3y1") -> MomentSet:
    """Moments as contractions of ``P1``, ``P21`` and the trigram table.

    ``kappa_order="y1y3"`` returns the transposed slices ``E[y1 y3^T y2_j]``;
    it exists only to compare the two orderings and does not yield a valid
    observable representation.
    """
    U = as_projection(U).U
    _check_dims(U, dists.v)
    mu = U.T @ dists.P1
    sigma = dists.project_bigram(U)
    kappa = dists.P3.contract(U, U, U)
    if kappa_order == "y1y3":
        kappa = kappa.transpose(1, 0, 2).copy()
    elif kappa_order != "y3y1":
        raise ValueError(f"unknown kappa_order {kappa_order!r}")
    return MomentSet(mu, sigma, kappa, provenance, N)


def empirical_moments(sample: TripleSample, U, v: Optional[int] = None,
                      kappa_order: str = "y3y1") -> MomentSet:
    """Sample moments of ``N`` triples.

    Triples are tallied into exact integer counts before any floating-point
    work, so the result does not depend on the order of the sample.
    """
    U = as_projection(U).U
    v = U.shape[0] if v is None else v
    dists = empirical_joint_distributions(sample, v)
    return moments_from_distributions(dists, U, "empirical", sample.N, kappa_order)


def sigma_min(sigma: np.ndarray) -> float:
    """Smallest singular value."""
    return float(np.linalg.svd(np.asarray(sigma, dtype=float), compute_uv=False)[-1])


def singular_tolerance(sigma: np.ndarray) -> float:
    smax = float(np.linalg.svd(sigma, compute_uv=False)[0])
    return SINGULAR_RTOL * max(1.0, smax)


def check_invertible(sigma: np.ndarray) -> float:
    """Return ``sigma_min`` or raise :class:`SingularMomentError`."""
    smin = sigma_min(sigma)
    tol = singular_tolerance(sigma)
    if not smin > tol:
        raise SingularMomentError(smin, tol)
    return smin


def lambda_of(moments: MomentSet) -> float:
    """Smallest absolute entry among ``mu``, ``Sigma^{-1}`` and ``kappa``."""
    check_invertible(moments.sigma)
    inv = np.linalg.inv(moments.sigma)
    entries = np.concatenate([moments.mu.ravel(), inv.ravel(), moments.kappa.ravel()])
    lam = float(np.min(np.abs(entries)))
    if lam == 0.0:
        warnings.warn("Lambda is zero: some moment entry is exactly zero",
                      StructuralZeroWarning, stacklevel=2)
    return lam
