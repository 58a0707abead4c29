"""Finite-sample diagnostics and error functionals against an exact oracle.

All bounds use a single ``delta`` for the joint event that every moment entry
is accurate at once.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .hmm import Hmm
from .moments import MomentSet, lambda_of, sigma_min

ENUMERATION_BUDGET = 10**6
TINY_PROB = 1e-300


class EnumerationBudgetError(ValueError):
    pass


def _check_common(m, delta, N=None):
    if m < 2:
        raise ValueError("m must be >= 2")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if N is not None and N < 1:
        raise ValueError("N must be >= 1")


def compute_J(m: int, delta: float, N: float) -> float:
    """Concentration radius ``2 m sqrt(2 log(2m/delta) / N)``."""
    _check_common(m, delta, N)
    return 2.0 * m * math.sqrt(2.0 * math.log(2.0 * m / delta) / N)


def _root_gap(epsilon: float, t: int) -> float:
    # (1 + eps)^(1/(2t+3)) - 1 without cancellation
    return math.expm1(math.log1p(epsilon) / (2 * t + 3))


def sample_complexity(m: int, epsilon: float, delta: float, t: int,
                      Lambda: float, sigma_m: float) -> float:
    """Smallest ``N`` meeting the relative-error sample-complexity bound.

    Returns an ``int``, or ``math.inf`` when ``Lambda`` or ``sigma_m`` is zero.
    """
    _check_common(m, delta)
    if epsilon <= 0 or t < 1:
        raise ValueError("need epsilon > 0 and t >= 1")
    if Lambda < 0 or sigma_m < 0:
        raise ValueError("Lambda and sigma_m must be nonnegative")
    if Lambda == 0.0 or sigma_m == 0.0:
        return math.inf
    return int(math.ceil(sample_complexity_bound(m, epsilon, delta, t, Lambda, sigma_m)))


def sample_complexity_bound(m: int, epsilon: float, delta: float, t: int,
                            Lambda: float, sigma_m: float) -> float:
    """Right-hand side of the sample-complexity bound before rounding up."""
    return (128.0 * m * m * math.log(2.0 * m / delta)
            / (_root_gap(epsilon, t) ** 2 * Lambda ** 2 * sigma_m ** 4))


def epsilon_for(N: float, m: int, delta: float, t: int, Lambda: float, sigma_m: float) -> float:
    """Relative accuracy guaranteed by ``N`` samples (inverse of :func:`sample_complexity`)."""
    _check_common(m, delta, N)
    if Lambda <= 0.0 or sigma_m <= 0.0:
        return math.inf
    gap = math.sqrt(128.0 * m * m * math.log(2.0 * m / delta) / N) / (Lambda * sigma_m ** 2)
    return math.expm1((2 * t + 3) * math.log1p(gap))


def checkable_conditions(lambda_hat: float, sigma_m_hat: float, m: int, delta: float,
                         N: float, epsilon: float, t: int) -> tuple[bool, bool]:
    """The two data-only inequalities certifying the relative-error guarantee."""
    _check_common(m, delta, N)
    root = math.sqrt(2.0 * math.log(2.0 * m / delta) / N)
    cond1 = lambda_hat * sigma_m_hat ** 2 >= (12.0 * m + 6.0 * m / _root_gap(epsilon, t)) * root
    cond2 = sigma_m_hat >= 10.0 * m * root
    return bool(cond1), bool(cond2)


@dataclass
class DiagnosticsReport:
    lambda_hat: float
    sigma_m_hat: float
    J: float
    N: int
    m: int
    t: int
    epsilon: float
    delta: float
    required_N: float
    condition1: bool
    condition2: bool
    epsilon_guaranteed: float
    notes: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.condition1 and self.condition2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["certified"] = self.certified
        return d


def diagnose(moments: MomentSet, N: int, epsilon: float, delta: float, t: int,
             notes: Optional[list] = None) -> DiagnosticsReport:
    """Assemble Lambda-hat, sigma_m-hat, J, the required ``N`` and both conditions."""
    notes = list(notes or [])
    m = moments.m
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        lam = lambda_of(moments)
    notes.extend(str(w.message) for w in caught)
    smin = sigma_min(moments.sigma)
    if smin > 1.0:
        notes.append(f"sigma_m_hat={smin:.3g} exceeds 1; |U_ij| <= 1 is probably violated")
    c1, c2 = checkable_conditions(lam, smin, m, delta, N, epsilon, t)
    return DiagnosticsReport(
        lambda_hat=lam, sigma_m_hat=smin, J=compute_J(m, delta, N), N=int(N), m=m, t=t,
        epsilon=epsilon, delta=delta,
        required_N=sample_complexity(m, epsilon, delta, t, min(lam, 1.0), min(smin, 1.0)),
        condition1=c1, condition2=c2,
        epsilon_guaranteed=epsilon_for(N, m, delta, t, lam, smin),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# enumeration


def enumerate_sequences(v: int, t: int) -> np.ndarray:
    """All ``v^t`` sequences in lexicographic order, shape (v^t, t)."""
    if v ** t > ENUMERATION_BUDGET:
        raise EnumerationBudgetError(f"v^t = {v}^{t} exceeds the budget {ENUMERATION_BUDGET}")
    if t == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((v,) * t).reshape(t, -1).T
    return grids.astype(np.int64)


def _representation(model):
    start, ops, end = model.linear_representation()
    scale = model.symbol_scale() if hasattr(model, "symbol_scale") else None
    return np.asarray(start, float), np.asarray(ops, float), np.asarray(end, float), scale


def prefix_probabilities(model, t: int) -> list[np.ndarray]:
    """Joint probabilities of every sequence of length ``1..t``.

    Entry ``k-1`` of the result has shape (v^k,), in the order of
    :func:`enumerate_sequences`.  Weighted models are mapped back to
    probabilities by their per-symbol scale.
    """
    start, ops, end, scale = _representation(model)
    v = ops.shape[0]
    if v ** t > ENUMERATION_BUDGET:
        raise EnumerationBudgetError(f"v^t = {v}^{t} exceeds the budget {ENUMERATION_BUDGET}")
    states = start[None, :]
    factor = np.ones(1)
    out = []
    for _ in range(t):
        # new index = old index * v + x, matching lexicographic enumeration
        states = np.einsum("xij,nj->nxi", ops, states).reshape(-1, start.shape[0])
        if scale is not None:
            factor = (factor[:, None] * scale[None, :]).reshape(-1)
        else:
            factor = np.ones(states.shape[0])
        out.append((states @ end) * factor)
    return out


@dataclass
class ErrorSummary:
    t: int
    sequences: np.ndarray
    true_prob: np.ndarray
    est_prob: np.ndarray
    true_cond: np.ndarray
    est_cond: np.ndarray
    max_relative_error: float
    l1_total: float
    kl_conditional: Optional[float]
    kl_undefined_prefix: Optional[tuple] = None
    skipped: int = 0

    def relative_errors(self) -> np.ndarray:
        rel = np.full(self.true_prob.shape, np.nan)
        ok = self.true_prob >= TINY_PROB
        rel[ok] = np.abs(self.est_prob[ok] / self.true_prob[ok] - 1.0)
        return rel

    def summary(self) -> dict:
        return {
            "t": self.t,
            "n_sequences": int(self.sequences.shape[0]),
            "max_relative_error": self.max_relative_error,
            "l1_total": self.l1_total,
            "kl_conditional": self.kl_conditional,
            "kl_undefined_prefix": list(self.kl_undefined_prefix) if self.kl_undefined_prefix else None,
            "skipped_tiny_prob": self.skipped,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sequence", "true_prob", "est_prob", "relative_error", "true_cond", "est_cond"])
        rel = self.relative_errors()
        for k in range(self.sequences.shape[0]):
            w.writerow([
                " ".join(map(str, self.sequences[k])), repr(float(self.true_prob[k])),
                repr(float(self.est_prob[k])), repr(float(rel[k])),
                repr(float(self.true_cond[k])), repr(float(self.est_cond[k])),
            ])
        return buf.getvalue()


def _conditionals(levels):
    """``Pr(x_t | x_{1:t-1})`` for every length-``t`` sequence."""
    joint = levels[-1]
    if len(levels) == 1:
        prefix = np.ones_like(joint)
    else:
        v = joint.shape[0] // levels[-2].shape[0]
        prefix = np.repeat(levels[-2], v)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(prefix != 0, joint / np.where(prefix != 0, prefix, 1.0), np.nan)
    return cond


def evaluate(hmm: Hmm, model, t: int) -> ErrorSummary:
    """Compare ``model`` with the oracle on every length-``t`` sequence.

    ``model`` may be any object with ``linear_representation`` (spectral,
    Hsu, weighted, or the :class:`Hmm` itself).  Sequences with oracle
    probability below 1e-300 are skipped for the relative error and counted.
    The conditional KL is undefined (``None``) if the model assigns a
    nonpositive conditional to some sequence of positive probability.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if hmm.v ** t > ENUMERATION_BUDGET:
        raise EnumerationBudgetError(f"v^t = {hmm.v}^{t} exceeds the budget {ENUMERATION_BUDGET}")
    true_levels = prefix_probabilities(hmm, t)
    est_levels = prefix_probabilities(model, t)
    seqs = enumerate_sequences(hmm.v, t)
    p, ph = true_levels[-1], est_levels[-1]

    ok = p >= TINY_PROB
    max_rel = float(np.max(np.abs(ph[ok] / p[ok] - 1.0))) if ok.any() else 0.0
    l1 = float(np.sum(np.abs(ph - p)))

    tc, ec = _conditionals(true_levels), _conditionals(est_levels)
    support = p > 0
    bad = support & ~(ec > 0)
    if bad.any():
        kl, undefined = None, tuple(int(s) for s in seqs[np.flatnonzero(bad)[0]])
    else:
        kl = float(np.sum(p[support] * np.log(tc[support] / ec[support])))
        undefined = None
    return ErrorSummary(t, seqs, p, ph, tc, ec, max_rel, l1, kl, undefined, int((~ok).sum()))


def eval_relative_error(hmm: Hmm, model, t: int) -> float:
    return evaluate(hmm, model, t).max_relative_error


def eval_l1(hmm: Hmm, model, t: int) -> float:
    return evaluate(hmm, model, t).l1_total


def eval_kl(hmm: Hmm, model, t: int) -> Optional[float]:
    return evaluate(hmm, model, t).kl_conditional
