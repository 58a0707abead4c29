"""Ground-truth HMMs, the observation-operator probability oracle and samplers.

Conventions are column-stochastic throughout: ``T[i, j] = Pr(h' = i | h = j)``
and ``O[i, j] = Pr(x = i | h = j)``.  Distributions are column vectors and
operators act on the left, so the joint probability of ``x_1, ..., x_t`` is
``1^T A_{x_t} ... A_{x_1} pi`` with ``A_x = T diag(O[x, :])``.

Random numbers come from :func:`numpy.random.default_rng` (PCG64), seeded
explicitly by every stochastic function.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

STOCHASTIC_TOL = 1e-12
RANK_TOL = 1e-10


@dataclass(frozen=True)
class Hmm:
    """Discrete HMM with ``m`` hidden states and ``v`` observation symbols.

    Parameters
    ----------
    T : ndarray, shape (m, m)
        Column-stochastic transition matrix.
    O : ndarray, shape (v, m)
        Column-stochastic emission matrix.
    pi : ndarray, shape (m,)
        Initial state distribution.
    """

    T: np.ndarray
    O: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        T = np.array(self.T, dtype=float)
        O = np.array(self.O, dtype=float)
        pi = np.array(self.pi, dtype=float).reshape(-1)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise ValueError(f"T must be square, got shape {T.shape}")
        if O.ndim != 2 or O.shape[1] != T.shape[0]:
            raise ValueError(f"O must be v x m with m={T.shape[0]}, got {O.shape}")
        if pi.shape != (T.shape[0],):
            raise ValueError(f"pi must have length {T.shape[0]}, got {pi.shape}")
        for name, arr in (("T", T), ("O", O), ("pi", pi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def m(self) -> int:
        return self.T.shape[0]

    @property
    def v(self) -> int:
        return self.O.shape[0]

    def linear_representation(self):
        """Return ``(start, operators, end)`` of the observable operator form."""
        return self.pi, observation_operators(self), np.ones(self.m)


@dataclass
class ValidationReport:
    checks: dict = field(default_factory=dict)
    messages: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, passed in self.checks.items() if not passed]

    def __str__(self):
        lines = []
        for name, passed in self.checks.items():
            msg = self.messages.get(name, "")
            lines.append(f"{'PASS' if passed else 'FAIL'} {name} {msg}".rstrip())
        return "\n".join(lines)


def _stochastic_check(arr, axis, tol):
    sums = arr.sum(axis=axis)
    in_range = bool(np.all(arr >= 0.0) and np.all(arr <= 1.0))
    dev = float(np.max(np.abs(sums - 1.0)))
    return in_range and dev <= tol, f"max|sum-1|={dev:.3g} entries_in_[0,1]={in_range}"


def validate(hmm: Hmm, rank_tol: float = RANK_TOL) -> ValidationReport:
    """Check stochasticity of ``T``, ``O``, ``pi`` and full column rank of ``O``."""
    report = ValidationReport()
    for name, arr, axis in (("T", hmm.T, 0), ("O", hmm.O, 0), ("pi", hmm.pi, None)):
        ok, msg = _stochastic_check(arr, axis, STOCHASTIC_TOL)
        report.checks[f"{name}_stochastic"] = ok
        report.messages[f"{name}_stochastic"] = msg
    smin = float(np.linalg.svd(hmm.O, compute_uv=False)[-1])
    report.checks["O_full_rank"] = smin > rank_tol
    report.messages["O_full_rank"] = f"sigma_min(O)={smin:.3g}"
    report.checks["v_at_least_m"] = hmm.v >= hmm.m
    return report


def _check_symbols(seq, v):
    seq = np.asarray(seq, dtype=np.int64).reshape(-1)
    if np.any(seq < 0) or np.any(seq >= v):
        raise IndexError(f"symbol out of range [0, {v}): {seq[(seq < 0) | (seq >= v)][:5]}")
    return seq


def observation_operator(hmm: Hmm, x: int) -> np.ndarray:
    """``A_x = T diag(O^T delta_x)``."""
    _check_symbols([x], hmm.v)
    return hmm.T * hmm.O[x][None, :]


def observation_operators(hmm: Hmm) -> np.ndarray:
    """All operators stacked as an array of shape (v, m, m)."""
    return hmm.T[None, :, :] * hmm.O[:, None, :]


def joint_prob(hmm: Hmm, seq: Sequence[int]) -> float:
    """Probability of the observation sequence via the operator product."""
    seq = _check_symbols(seq, hmm.v)
    if seq.size == 0:
        raise ValueError("empty sequence")
    state = hmm.pi
    for x in seq:
        state = hmm.T @ (hmm.O[x] * state)
    return float(state.sum())


def log_joint_prob(hmm: Hmm, seq: Sequence[int]) -> float:
    """Natural log of :func:`joint_prob`, renormalising at every step.

    Returns ``-inf`` for zero-probability sequences.
    """
    seq = _check_symbols(seq, hmm.v)
    if seq.size == 0:
        raise ValueError("empty sequence")
    state = hmm.pi
    total = 0.0
    for x in seq:
        state = hmm.T @ (hmm.O[x] * state)
        s = state.sum()
        if s <= 0.0:
            return -np.inf
        total += np.log(s)
        state = state / s
    return float(total)


def forward_prob(hmm: Hmm, seq: Sequence[int]) -> float:
    """Classical forward recursion with explicit loops.

    Kept deliberately independent of :func:`joint_prob` so that the two can
    check each other.
    """
    seq = _check_symbols(seq, hmm.v)
    if seq.size == 0:
        raise ValueError("empty sequence")
    m = hmm.m
    alpha = [hmm.pi[i] * hmm.O[seq[0], i] for i in range(m)]
    for x in seq[1:]:
        alpha = [
            hmm.O[x, j] * sum(hmm.T[j, i] * alpha[i] for i in range(m))
            for j in range(m)
        ]
    return float(sum(alpha))


def conditional_prob(hmm: Hmm, prefix: Sequence[int], x: int) -> float:
    """``Pr(x | prefix)``; raises if the prefix has zero probability."""
    prefix = list(_check_symbols(prefix, hmm.v))
    _check_symbols([x], hmm.v)
    if not prefix:
        return joint_prob(hmm, [x])
    denom = joint_prob(hmm, prefix)
    if denom <= 0.0:
        raise ZeroDivisionError(f"prefix {prefix} has zero probability")
    return joint_prob(hmm, prefix + [int(x)]) / denom


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class TripleSample:
    """``N`` independent observation triples, one row ``(x1, x2, x3)`` each."""

    triples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.triples, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"triples must have shape (N, 3), got {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("a TripleSample needs at least one triple")
        if np.any(arr < 0):
            raise ValueError("negative symbol index in triples")
        arr.setflags(write=False)
        object.__setattr__(self, "triples", arr)

    @property
    def N(self) -> int:
        return self.triples.shape[0]

    def __len__(self):
        return self.N


def _draw_categorical(rng, cum_cols, states, u):
    """Inverse-CDF draw from column ``states[n]`` of a cumulative matrix."""
    out = np.empty(states.shape[0], dtype=np.int64)
    last = cum_cols.shape[0] - 1
    for j in np.unique(states):
        idx = np.flatnonzero(states == j)
        out[idx] = np.minimum(np.searchsorted(cum_cols[:, j], u[idx], side="right"), last)
    return out


def _sample_block(hmm: Hmm, N: int, rng: np.random.Generator) -> np.ndarray:
    cum_pi = np.cumsum(hmm.pi)[:, None]
    cum_T = np.cumsum(hmm.T, axis=0)
    cum_O = np.cumsum(hmm.O, axis=0)
    h = _draw_categorical(rng, cum_pi, np.zeros(N, dtype=np.int64), rng.random(N))
    out = np.empty((N, 3), dtype=np.int64)
    for k in range(3):
        if k:
            h = _draw_categorical(rng, cum_T, h, rng.random(N))
        out[:, k] = _draw_categorical(rng, cum_O, h, rng.random(N))
    return out


def sample_triples(hmm: Hmm, N: int, seed: int | None = None, threads: int = 1) -> TripleSample:
    """Draw ``N`` i.i.d. triples, each from a fresh chain started at ``pi``.

    With ``threads > 1`` the draw is split across independent streams spawned
    from ``seed``; the result is then distribution-identical (not
    sequence-identical) to the single-stream draw.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if threads <= 1:
        return TripleSample(_sample_block(hmm, N, np.random.default_rng(seed)))
    children = np.random.SeedSequence(seed).spawn(threads)
    sizes = [N // threads + (i < N % threads) for i in range(threads)]
    with ThreadPoolExecutor(threads) as pool:
        blocks = list(pool.map(
            lambda a: _sample_block(hmm, a[0], np.random.default_rng(a[1])),
            [(n, c) for n, c in zip(sizes, children) if n > 0],
        ))
    return TripleSample(np.concatenate(blocks, axis=0))


def sample_sequences(hmm: Hmm, n_seq: int, length: int, seed: int | None = None) -> np.ndarray:
    """Draw ``n_seq`` independent sequences of the given length, shape (n_seq, length)."""
    rng = np.random.default_rng(seed)
    cum_T = np.cumsum(hmm.T, axis=0)
    cum_O = np.cumsum(hmm.O, axis=0)
    h = _draw_categorical(rng, np.cumsum(hmm.pi)[:, None], np.zeros(n_seq, dtype=np.int64),
                          rng.random(n_seq))
    out = np.empty((n_seq, length), dtype=np.int64)
    for k in range(length):
        if k:
            h = _draw_categorical(rng, cum_T, h, rng.random(n_seq))
        out[:, k] = _draw_categorical(rng, cum_O, h, rng.random(n_seq))
    return out


def exact_trigram_tensor(hmm: Hmm) -> np.ndarray:
    """Dense ``P[x1, x2, x3] = Pr(x1, x2, x3)``, shape (v, v, v)."""
    # joint over (h1, x1) then push through
    first = hmm.O * hmm.pi[None, :]                      # [x1, h1]
    h2 = np.einsum("ij,xj->xi", hmm.T, first)            # [x1, h2]
    second = np.einsum("yi,xi->xyi", hmm.O, h2)          # [x1, x2, h2]
    h3 = np.einsum("ki,xyi->xyk", hmm.T, second)         # [x1, x2, h3]
    return np.einsum("zk,xyk->xyz", hmm.O, h3)


def sample_trigram_counts(hmm: Hmm, N: int, seed: int | None = None) -> np.ndarray:
    """Counts of ``N`` i.i.d. triples drawn in one multinomial, shape (v, v, v).

    Distribution-identical to tallying :func:`sample_triples`, at a cost
    independent of ``N``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    p = exact_trigram_tensor(hmm).reshape(-1)
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    return rng.multinomial(N, p).reshape((hmm.v,) * 3)


# ---------------------------------------------------------------------------
# fixtures and random families


def identity_hmm(m: int = 2, pi=None) -> Hmm:
    """Deterministic chain: ``T = O = I``; ``pi`` defaults to ``e_0``."""
    if pi is None:
        pi = np.eye(m)[0]
    return Hmm(np.eye(m), np.eye(m), pi)


def hmm_a() -> Hmm:
    """Two-state, two-symbol reference HMM used throughout the tests and demos."""
    return Hmm(
        T=[[0.7, 0.3], [0.3, 0.7]],
        O=[[0.9, 0.2], [0.1, 0.8]],
        pi=[0.5, 0.5],
    )


def random_hmm(m: int, v: int, seed: int | None = None, family: str = "random-dense",
               sparsity: float = 0.3, max_tries: int = 100) -> Hmm:
    """Draw an HMM whose columns come from a flat Dirichlet.

    ``family="random-sparse"`` zeroes a ``sparsity`` fraction of the entries of
    ``T`` and ``O`` (keeping at least one per column), renormalises, and
    rejects draws with rank-deficient ``O``.
    """
    if m < 2 or v < m:
        raise ValueError("need m >= 2 and v >= m")
    if family == "identity":
        if v != m:
            raise ValueError("identity family needs v == m")
        return identity_hmm(m)
    rng = np.random.default_rng(seed)
    if family == "random-dense":
        for _ in range(max_tries):
            hmm = Hmm(rng.dirichlet(np.ones(m), size=m).T,
                      rng.dirichlet(np.ones(v), size=m).T,
                      rng.dirichlet(np.ones(m)))
            if validate(hmm).ok:
                return hmm
        raise RuntimeError("could not draw a full-rank dense HMM")
    if family == "random-sparse":
        for _ in range(max_tries):
            T = _sparsify(rng.dirichlet(np.ones(m), size=m).T, sparsity, rng)
            O = _sparsify(rng.dirichlet(np.ones(v), size=m).T, sparsity, rng)
            hmm = Hmm(T, O, rng.dirichlet(np.ones(m)))
            if validate(hmm).ok:
                return hmm
        raise RuntimeError(f"rejection limit ({max_tries}) exceeded for random-sparse family")
    raise ValueError(f"unknown family {family!r}")


def _sparsify(M, fraction, rng):
    M = M.copy()
    mask = rng.random(M.shape) < fraction
    keep = M.argmax(axis=0)
    mask[keep, np.arange(M.shape[1])] = False
    M[mask] = 0.0
    return M / M.sum(axis=0, keepdims=True)
