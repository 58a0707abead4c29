"""N-gram count ingestion and the Lambda-vs-m / sigma_m-vs-m curves.

Count files are UTF-8 TSV with one n-gram per line::

    token<TAB>count
    tok1<TAB>tok2<TAB>count
    tok1<TAB>tok2<TAB>tok3<TAB>count

Orders may be mixed within a file.  The ``v - 1`` most frequent unigrams
(ties broken lexicographically) form the vocabulary; every other token, in
every order, is folded into the out-of-vocabulary slot ``v - 1``.  Tokens are
compared verbatim.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .distributions import JointDistributions, TrigramTable, bigram_matrix
from .hmm import TripleSample
from .model import BoundWarning, _fix_signs, _top_left_singular, inverse_sqrt_weights, \
    rescale_projection, weighted_projection
from .moments import Projection, SingularMomentError, lambda_of, moments_from_distributions, \
    sigma_min

OOV = "<OOV>"
Q_MODES = ("none", "inverse-sqrt-P1")


@dataclass(frozen=True)
class NgramCounts:
    """Folded counts over a dense vocabulary; the last slot is OOV.

    Bigrams are coordinate arrays ``(x1, x2, count)``; trigrams are
    coordinate arrays sorted by the middle symbol with ``tri_offsets[x]``
    marking where slice ``x`` starts.
    """

    vocab: tuple
    unigram: np.ndarray
    bi_x1: np.ndarray
    bi_x2: np.ndarray
    bi_count: np.ndarray
    tri_x1: np.ndarray
    tri_x2: np.ndarray
    tri_x3: np.ndarray
    tri_count: np.ndarray
    tri_offsets: np.ndarray

    @property
    def v(self) -> int:
        return len(self.vocab)

    @property
    def totals(self) -> tuple:
        return int(self.unigram.sum()), int(self.bi_count.sum()), int(self.tri_count.sum())

    def index(self, token: str) -> int:
        try:
            return self.vocab.index(token)
        except ValueError:
            return self.v - 1

    def trigram_slice(self, x: int):
        lo, hi = self.tri_offsets[x], self.tri_offsets[x + 1]
        return self.tri_x1[lo:hi], self.tri_x3[lo:hi], self.tri_count[lo:hi]


def _parse_count(field, where):
    try:
        c = int(field)
    except ValueError:
        try:
            f = float(field)
        except ValueError:
            raise ValueError(f"{where}: count {field!r} is not a number") from None
        if not f.is_integer():
            raise ValueError(f"{where}: count {field!r} is not an integer")
        c = int(f)
    if c < 0:
        raise ValueError(f"{where}: negative count {c}")
    return c


def read_count_lines(lines: Iterable[str], source: str = "<input>"):
    """Parse TSV rows into three ``Counter`` objects keyed by token tuples."""
    orders = (Counter(), Counter(), Counter())
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        where = f"{source}:{lineno}"
        if not 2 <= len(fields) <= 4 or any(f == "" for f in fields[:-1]):
            raise ValueError(f"{where}: malformed row {line!r}")
        orders[len(fields) - 2][tuple(fields[:-1])] += _parse_count(fields[-1], where)
    return orders


def build_counts(unigrams: Counter, bigrams: Counter, trigrams: Counter, v: int) -> NgramCounts:
    """Select the vocabulary and fold everything else into OOV."""
    if v < 2:
        raise ValueError("v must be >= 2")
    if not (unigrams or bigrams or trigrams):
        raise ValueError("no n-gram counts found")
    ranked = sorted(((tok[0], c) for tok, c in unigrams.items()), key=lambda kv: (-kv[1], kv[0]))
    kept = [tok for tok, _ in ranked[: v - 1]]
    vocab = tuple(kept) + (OOV,)
    idx = {tok: i for i, tok in enumerate(kept)}
    oov = len(kept)

    def ids(keys, n):
        arr = np.array([[idx.get(t, oov) for t in k] for k in keys], dtype=np.int64)
        return arr.reshape(-1, n)

    V = len(vocab)
    uni = np.zeros(V, dtype=np.int64)
    if unigrams:
        np.add.at(uni, ids(unigrams.keys(), 1)[:, 0],
                  np.fromiter(unigrams.values(), dtype=np.int64))

    def fold(counter, n):
        if not counter:
            return [np.zeros(0, dtype=np.int64)] * (n + 1)
        keys = ids(counter.keys(), n)
        vals = np.fromiter(counter.values(), dtype=np.int64)
        flat = np.zeros(len(vals), dtype=np.int64)
        for c in range(n):
            flat = flat * V + keys[:, c]
        uniq, inv = np.unique(flat, return_inverse=True)
        summed = np.bincount(inv, weights=vals).astype(np.int64)
        cols = []
        for _ in range(n):
            cols.append(uniq % V)
            uniq = uniq // V
        return cols[::-1] + [summed]

    b1, b2, bc = fold(bigrams, 2)
    t1, t2, t3, tc = fold(trigrams, 3)
    order = np.lexsort((t1, t3, t2))
    t1, t2, t3, tc = t1[order], t2[order], t3[order], tc[order]
    offsets = np.searchsorted(t2, np.arange(V + 1))
    return NgramCounts(vocab, uni, b1, b2, bc, t1, t2, t3, tc, offsets)


def load_counts(paths: Sequence[str | Path], v: int) -> NgramCounts:
    """Read and merge count files, keeping the top ``v - 1`` unigrams."""
    merged = (Counter(), Counter(), Counter())
    for path in paths:
        with open(path, encoding="utf-8", newline="\n") as fh:
            for acc, part in zip(merged, read_count_lines(fh, str(path))):
                acc.update(part)
    if not any(merged):
        raise ValueError("empty input: no n-gram rows in " + ", ".join(map(str, paths)))
    return build_counts(*merged, v)


def distributions_from_counts(counts: NgramCounts) -> JointDistributions:
    """Normalise each order by its own total."""
    n1, n2, n3 = counts.totals
    if min(n1, n2, n3) <= 0:
        raise ValueError(f"zero mass in some order (totals: {n1}, {n2}, {n3})")
    v = counts.v
    P1 = counts.unigram / n1
    P21 = bigram_matrix(v, counts.bi_x2, counts.bi_x1, counts.bi_count / n2)
    P3 = TrigramTable.from_coords(v, counts.tri_x1, counts.tri_x2, counts.tri_x3,
                                  counts.tri_count / n3)
    return JointDistributions(P1, P21, P3)


def triples_to_counters(sample: TripleSample, tokens: Sequence[str] | None = None):
    """Unigram (x1), bigram (x1, x2) and trigram counters of a triple sample."""
    tr = sample.triples
    name = (lambda i: str(i)) if tokens is None else (lambda i: tokens[i])
    uni = Counter({(name(k),): int(c) for k, c in zip(*np.unique(tr[:, 0], return_counts=True))})
    bu, bc = np.unique(tr[:, :2], axis=0, return_counts=True)
    bi = Counter({(name(a), name(b)): int(c) for (a, b), c in zip(bu, bc)})
    tu, tc = np.unique(tr, axis=0, return_counts=True)
    tri = Counter({(name(a), name(b), name(c)): int(n) for (a, b, c), n in zip(tu, tc)})
    return uni, bi, tri


def write_count_files(counters, out_dir: str | Path, prefix: str = "") -> list[Path]:
    """Write ``unigram.tsv``, ``bigram.tsv`` and ``trigram.tsv`` in sorted order."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, counter in zip(("unigram", "bigram", "trigram"), counters):
        path = out_dir / f"{prefix}{name}.tsv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for key in sorted(counter):
                fh.write("\t".join(key) + f"\t{counter[key]}\n")
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class CurveRow:
    m: int
    lambda_hat: float
    sigma_m_hat: float
    status: str


@dataclass(frozen=True)
class Curve:
    rows: tuple
    lambda_slope: float
    sigma_slope: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "lambda_hat", "sigma_m_hat", "status"])
        for r in self.rows:
            w.writerow([r.m, repr(r.lambda_hat), repr(r.sigma_m_hat), r.status])
        if self.rows:
            w.writerow(["slope", repr(self.lambda_slope), repr(self.sigma_slope), "summary"])
        return buf.getvalue()


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x`` over positive finite points."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    ok = (xs > 0) & (ys > 0) & np.isfinite(ys)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(xs[ok]), np.log(ys[ok]), 1)[0])


def lambda_curve(counts: NgramCounts | JointDistributions, m_values: Sequence[int],
                 rescale: bool = False, q_mode: str = "none") -> Curve:
    """Lambda-hat and sigma_m-hat for each ``m`` using the first ``m`` singular vectors.

    ``rescale`` scales each row of ``U`` so its largest entry is 1;
    ``q_mode="inverse-sqrt-P1"`` computes starred moments with
    ``q = 1/sqrt(P1)``.  Rows whose rank is not supported carry a failure
    status and NaN values.
    """
    if q_mode not in Q_MODES:
        raise ValueError(f"q_mode must be one of {Q_MODES}")
    dists = counts if isinstance(counts, JointDistributions) else distributions_from_counts(counts)
    m_values = [int(m) for m in m_values]
    if not m_values:
        return Curve((), math.nan, math.nan)
    top = min(max(m_values), dists.v)
    U_all, s = _top_left_singular(dists.P21, top)
    U_all = _fix_signs(U_all)
    q = inverse_sqrt_weights(dists.P1) if q_mode != "none" else None
    rows = []
    for m in m_values:
        if m < 1 or m > top or s[m - 1] < 1e-12 * max(s[0], 1e-300):
            rows.append(CurveRow(m, math.nan, math.nan, "rank-deficient"))
            continue
        U = Projection(U_all[:, :m], "orthonormal-SVD")
        if rescale:
            U = rescale_projection(U)
        if q is not None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", BoundWarning)
                U = weighted_projection(U, q)
        mom = moments_from_distributions(dists, U)
        smin = sigma_min(mom.sigma)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                lam = lambda_of(mom)
        except SingularMomentError:
            rows.append(CurveRow(m, math.nan, smin, "singular-sigma"))
            continue
        rows.append(CurveRow(m, lam, smin, "ok"))
    ok = [r for r in rows if r.status == "ok"]
    return Curve(
        tuple(rows),
        loglog_slope([r.m for r in ok], [r.lambda_hat for r in ok]),
        loglog_slope([r.m for r in ok], [r.sigma_m_hat for r in ok]),
    )
