"""Observable representations learned from moments.

Three linear automata share one evaluation path:

* :class:`SpectralModel` -- the reduced model ``c_inf^T C(y_t) ... C(y_1) c1``
  with ``c1 = mu``, ``c_inf^T = mu^T Sigma^{-1}`` and ``C(y) = K(y) Sigma^{-1}``;
  its operator tensor has only ``m^3`` entries.
* :class:`HsuModel` -- the baseline ``b_inf^T B_{x_t} ... B_{x_1} b1`` with one
  ``m x m`` operator per vocabulary symbol.
* :class:`WeightedModel` -- the reduced model on ``y* = U^T diag(q)^2 delta_x``,
  which estimates ``Pr(x_{1:t}) * prod q(x_i)^2``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .distributions import JointDistributions, empirical_joint_distributions
from .hmm import Hmm, TripleSample
from .moments import (
    MomentSet,
    Projection,
    SingularMomentError,
    as_projection,
    check_invertible,
    exact_moments,
    moments_from_distributions,
)

PROJECTION_TOL = 1e-12
PINV_RTOL = 1e-10
NORMALIZER_TOL = 1e-14


class RankDeficiencyError(np.linalg.LinAlgError):
    """The requested rank is not supported by the data."""


class UnstableConditionalError(ArithmeticError):
    """The belief-state normaliser is numerically zero."""


class BoundWarning(UserWarning):
    """Some projected observation has an entry outside ``[-1, 1]``."""


class Estimate(NamedTuple):
    """Raw signed estimate and the same value clipped to ``[0, 1]``."""

    value: float
    clamped: float


class LikelihoodRatio(NamedTuple):
    ratio: float
    prob: float


# ---------------------------------------------------------------------------
# projections


def _fix_signs(U: np.ndarray) -> np.ndarray:
    # argmax returns the lowest index on ties
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def _top_left_singular(P, m: int):
    if sp.issparse(P) and m < min(P.shape) - 1:
        U, s, _ = spla.svds(P.astype(float), k=m)
        order = np.argsort(s)[::-1]
        return U[:, order], s[order]
    dense = P.toarray() if sp.issparse(P) else np.asarray(P, dtype=float)
    U, s, _ = np.linalg.svd(dense)
    return U[:, :m], s[:m]


def compute_projection(P21, m: int) -> Projection:
    """Top-``m`` left singular vectors of the bigram matrix.

    Each column is signed so that its largest-magnitude entry is positive.
    """
    if m < 1 or m > P21.shape[0]:
        raise ValueError(f"m={m} out of range for a {P21.shape[0]}-symbol bigram matrix")
    U, s = _top_left_singular(P21, m)
    if s[m - 1] < PROJECTION_TOL:
        raise RankDeficiencyError(
            f"singular value {m} of P21 is {s[m - 1]:.3g} < {PROJECTION_TOL}; "
            "range(O) cannot be covered with this m"
        )
    return Projection(_fix_signs(U), "orthonormal-SVD")


def rescale_projection(U) -> Projection:
    """Scale every nonzero row so that its largest absolute entry is exactly 1."""
    U = as_projection(U)
    if U.kind != "orthonormal-SVD":
        raise ValueError(f"expected an orthonormal-SVD projection, got kind={U.kind!r}")
    rowmax = np.max(np.abs(U.U), axis=1)
    scale = np.ones_like(rowmax)
    nz = rowmax > 0
    scale[nz] = 1.0 / rowmax[nz]
    out = U.U * scale[:, None]
    # division can leave the row maximum one ulp off 1
    rows = np.flatnonzero(nz)
    cols = np.argmax(np.abs(out[rows]), axis=1)
    out[rows, cols] = np.sign(out[rows, cols])
    return Projection(out, "rescaled")


def compute_weighted_projection(P21, m: int, q: np.ndarray) -> Projection:
    """Base projection ``U`` for the weighted model.

    Returns ``U = diag(q)^{-1} V`` where ``V`` holds the top-``m`` left singular
    vectors of ``diag(q) P21 diag(q)``.  Then ``diag(q) U = V`` is orthonormal
    and spans ``range(diag(q) O)``, which is what makes the weighted
    representation exact.
    """
    q = _check_weights(q)
    if sp.issparse(P21):
        Dq = sp.diags_array(q)
        Pq = sp.csr_array(Dq @ P21 @ Dq)
    else:
        Pq = q[:, None] * np.asarray(P21) * q[None, :]
    V = compute_projection(Pq, m).U
    return Projection(V / q[:, None], "weighted-basis")


# ---------------------------------------------------------------------------
# shared automaton evaluation


def _scaled_product(start, ops, seq, end):
    """``end^T ops[x_t] ... ops[x_1] start`` with per-step rescaling."""
    state = np.asarray(start, dtype=float)
    log_scale = 0.0
    for x in seq:
        state = ops[x] @ state
        s = float(np.max(np.abs(state)))
        if s == 0.0:
            return 0.0
        log_scale += math.log(s)
        state = state / s
    val = float(end @ state)
    if val == 0.0:
        return 0.0
    mag = math.log(abs(val)) + log_scale
    return math.copysign(math.exp(mag) if mag < 709.0 else math.inf, val)


def _symbols(seq, v):
    seq = np.asarray(seq, dtype=np.int64).reshape(-1)
    if np.any(seq < 0) or np.any(seq >= v):
        raise IndexError(f"symbol out of range [0, {v})")
    return seq


def _estimate(value: float) -> Estimate:
    return Estimate(value, min(1.0, max(0.0, value)))


# ---------------------------------------------------------------------------
# reduced model


@dataclass(frozen=True)
class SpectralModel:
    U: Projection
    c1: np.ndarray
    c_inf: np.ndarray
    C: np.ndarray
    moments: Optional[MomentSet] = None

    @property
    def m(self) -> int:
        return self.c1.shape[0]

    @property
    def v(self) -> int:
        return self.U.v

    def operator(self, y: np.ndarray) -> np.ndarray:
        """``C(y) = sum_j y_j C[:, :, j]``."""
        return self.C @ np.asarray(y, dtype=float)

    def symbol_operators(self) -> np.ndarray:
        """``C(U^T delta_x)`` for every symbol, shape (v, m, m)."""
        return np.einsum("ikj,xj->xik", self.C, self.U.U)

    def linear_representation(self):
        return self.c1, self.symbol_operators(), self.c_inf


def build_model(moments: MomentSet, U) -> SpectralModel:
    """``c1 = mu``, ``Sigma^T c_inf = mu``, ``C[:, :, j] = K(e_j) Sigma^{-1}``."""
    U = as_projection(U)
    if U.m != moments.m:
        raise ValueError(f"projection has m={U.m}, moments have m={moments.m}")
    check_invertible(moments.sigma)
    S = moments.sigma
    c_inf = np.linalg.solve(S.T, moments.mu)
    # C_j S = K_j  <=>  S^T C_j^T = K_j^T, solved for all j at once
    m = moments.m
    Kt = moments.kappa.transpose(1, 0, 2).reshape(m, m * m)
    C = np.linalg.solve(S.T, Kt).reshape(m, m, m).transpose(1, 0, 2)
    return SpectralModel(U, moments.mu.copy(), c_inf, np.ascontiguousarray(C), moments)


def sequence_prob(model: SpectralModel, seq: Sequence[int]) -> Estimate:
    """``c_inf^T C(y_t) ... C(y_1) c1``; raw values may leave ``[0, 1]``."""
    seq = _symbols(seq, model.v)
    ops = {int(x): model.operator(model.U.U[x]) for x in np.unique(seq)}
    return _estimate(_scaled_product(model.c1, ops, seq, model.c_inf))


@dataclass(frozen=True)
class BeliefState:
    """Normalised internal state after ``t`` observations.

    The product of normalisers so far (the estimated prefix probability) is
    kept as ``sign * exp(log_abs_prefix)``.
    """

    c: np.ndarray
    t: int = 0
    log_abs_prefix: float = 0.0
    sign: float = 1.0

    @property
    def prefix_prob(self) -> float:
        return self.sign * math.exp(self.log_abs_prefix)


def initial_state(model) -> BeliefState:
    start = model.c1 if isinstance(model, SpectralModel) else model.linear_representation()[0]
    return BeliefState(np.asarray(start, dtype=float).copy())


def conditional_update(model, state: BeliefState, x: int):
    """One step of the conditional recursion.

    Returns ``(next_state, p)`` with ``p = c_inf^T C(y) c`` the estimated
    ``Pr(x | prefix)`` and ``next_state.c = C(y) c / p``.  Works for any model
    exposing ``linear_representation``.
    """
    if isinstance(model, SpectralModel):
        _symbols([x], model.v)
        A = model.operator(model.U.U[x])
        end = model.c_inf
    else:
        _, ops, end = model.linear_representation()
        _symbols([x], ops.shape[0])
        A = ops[x]
    nxt = A @ state.c
    p = float(end @ nxt)
    if abs(p) < NORMALIZER_TOL:
        raise UnstableConditionalError(
            f"normaliser {p:.3g} at step {state.t + 1} (symbol {x}) is numerically zero"
        )
    return (
        BeliefState(nxt / p, state.t + 1, state.log_abs_prefix + math.log(abs(p)),
                    state.sign * math.copysign(1.0, p)),
        p,
    )


# ---------------------------------------------------------------------------
# Hsu et al. baseline


@dataclass(frozen=True)
class HsuModel:
    U: Projection
    b1: np.ndarray
    b_inf: np.ndarray
    B: np.ndarray

    @property
    def m(self) -> int:
        return self.b1.shape[0]

    @property
    def v(self) -> int:
        return self.B.shape[0]

    def linear_representation(self):
        return self.b1, self.B, self.b_inf


def truncated_pinv(M: np.ndarray, rtol: float = PINV_RTOL) -> np.ndarray:
    """Pseudo-inverse dropping singular values below ``rtol * sigma_max``."""
    Uu, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > rtol * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (Vt.T * inv_s) @ Uu.T


def build_hsu_model(dists: JointDistributions, U, strict: bool = True) -> HsuModel:
    """``b1 = U^T P1``, ``b_inf^T = P1^T (U^T P21)^+``, ``B_x = U^T P3x1[x] (U^T P21)^+``.

    With ``strict`` a rank-deficient ``U^T P21`` raises; otherwise the
    truncated pseudo-inverse is used as is.
    """
    U = as_projection(U)
    UP21 = np.asarray(dists.P21.T @ U.U).T          # m x v
    s = np.linalg.svd(UP21, compute_uv=False)
    if strict and not (s[0] > 0 and s[-1] > PINV_RTOL * s[0]):
        raise RankDeficiencyError(
            f"U^T P21 is rank deficient: sigma_min={s[-1]:.3g}, sigma_max={s[0]:.3g}"
        )
    Z = truncated_pinv(UP21)                         # v x m
    b1 = U.U.T @ dists.P1
    b_inf = Z.T @ dists.P1
    B = dists.P3.sliced_products(U.U, Z)
    return HsuModel(U, b1, b_inf, B)


def hsu_sequence_prob(model: HsuModel, seq: Sequence[int]) -> Estimate:
    seq = _symbols(seq, model.v)
    return _estimate(_scaled_product(model.b1, model.B, seq, model.b_inf))


# ---------------------------------------------------------------------------
# likelihood-ratio variant


def _check_weights(q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if not np.all(np.isfinite(q)) or np.any(q <= 0):
        raise ValueError("weights q must be finite and strictly positive")
    return q


def inverse_sqrt_weights(P1: np.ndarray) -> np.ndarray:
    """``q = 1/sqrt(P1)``; symbols with zero mass get weight 1 (they never occur)."""
    P1 = np.asarray(P1, dtype=float)
    q = np.ones_like(P1)
    pos = P1 > 0
    q[pos] = 1.0 / np.sqrt(P1[pos])
    return q


def weighted_projection(U, q) -> Projection:
    """``diag(q)^2 U``: row ``x`` is the starred observation ``y*_x``."""
    U = as_projection(U)
    q = _check_weights(q)
    if q.shape[0] != U.v:
        raise ValueError(f"q has length {q.shape[0]}, projection has v={U.v}")
    return Projection((q * q)[:, None] * U.U, "weighted")


@dataclass(frozen=True)
class WeightedModel:
    q: np.ndarray
    U: Projection
    model: SpectralModel

    @property
    def m(self) -> int:
        return self.model.m

    @property
    def v(self) -> int:
        return self.model.v

    @property
    def c1(self):
        return self.model.c1

    @property
    def c_inf(self):
        return self.model.c_inf

    @property
    def C(self):
        return self.model.C

    @property
    def moments(self):
        return self.model.moments

    def linear_representation(self):
        return self.model.linear_representation()

    def symbol_scale(self) -> np.ndarray:
        """Per-symbol factor ``1/q^2`` turning ratios back into probabilities."""
        return 1.0 / (self.q * self.q)


def build_weighted_model(source, U, q, N: Optional[int] = None) -> WeightedModel:
    """Reduced model on the starred observations ``y* = U^T diag(q)^2 delta_x``.

    ``source`` is an :class:`~spectral_hmm.hmm.Hmm` (exact moments), a
    :class:`~spectral_hmm.distributions.JointDistributions` or a
    :class:`~spectral_hmm.hmm.TripleSample`.
    """
    U = as_projection(U)
    W = weighted_projection(U, q)
    if np.max(np.abs(W.U)) > 1.0:
        warnings.warn(
            f"max |y*| = {np.max(np.abs(W.U)):.3g} > 1; the finite-sample guarantee does not apply",
            BoundWarning, stacklevel=2,
        )
    if isinstance(source, Hmm):
        moments = exact_moments(source, W)
    elif isinstance(source, JointDistributions):
        moments = moments_from_distributions(source, W, "empirical", N)
    elif isinstance(source, TripleSample):
        dists = empirical_joint_distributions(source, W.v)
        moments = moments_from_distributions(dists, W, "empirical", source.N)
    else:
        raise TypeError(f"unsupported source type {type(source).__name__}")
    return WeightedModel(_check_weights(q).copy(), U, build_model(moments, W))


def likelihood_ratio(model: WeightedModel, seq: Sequence[int]) -> LikelihoodRatio:
    """Estimated ``Pr(x_{1:t}) Q(x_{1:t})^2`` and the probability it implies."""
    seq = _symbols(seq, model.v)
    inner = model.model
    ops = {int(x): inner.operator(inner.U.U[x]) for x in np.unique(seq)}
    lam = _scaled_product(inner.c1, ops, seq, inner.c_inf)
    Q2 = float(np.prod(model.q[seq] ** 2))
    return LikelihoodRatio(lam, lam / Q2)


__all__ = [
    "BoundWarning", "BeliefState", "Estimate", "HsuModel", "LikelihoodRatio",
    "RankDeficiencyError", "SingularMomentError", "SpectralModel", "UnstableConditionalError",
    "WeightedModel", "build_hsu_model", "build_model", "build_weighted_model",
    "compute_projection", "compute_weighted_projection", "conditional_update",
    "hsu_sequence_prob", "initial_state", "inverse_sqrt_weights", "likelihood_ratio",
    "rescale_projection", "sequence_prob", "truncated_pinv", "weighted_projection",
]
