"""Command-line entry point: ``spectral-hmm <subcommand> ...``.

Data products go to ``--out-dir``; logs go to stderr.  Every run also writes
``<subcommand>.config.json`` with its fully resolved arguments.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io as sio
from .diagnostics import EnumerationBudgetError, diagnose, evaluate, prefix_probabilities
from .distributions import empirical_joint_distributions, exact_joint_distributions
from .hmm import random_hmm, sample_triples, validate
from .model import build_hsu_model, build_model, build_weighted_model, compute_projection, \
    compute_weighted_projection, inverse_sqrt_weights, rescale_projection
from .moments import lambda_of, moments_from_distributions
from .ngram import Q_MODES, distributions_from_counts, lambda_curve, load_counts

log = logging.getLogger("spectral_hmm")


def _write_config(args, name):
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
           if k != "func"}
    sio.save_json(cfg, Path(args.out_dir) / f"{name}.config.json")


def _human(args, text):
    if args.summary:
        print(text, file=sys.stderr)


def cmd_generate(args):
    hmm = random_hmm(args.m, args.v, seed=args.seed, family=args.family,
                     sparsity=args.sparsity)
    report = validate(hmm)
    if not report.ok:
        raise RuntimeError(f"generated HMM failed validation:\n{report}")
    path = sio.save_hmm(hmm, Path(args.out_dir) / f"{args.name}.hmm.json")
    _write_config(args, "generate")
    log.info("wrote %s", path)
    _human(args, str(report))


def cmd_sample(args):
    hmm = sio.load_hmm(args.hmm)
    sample = sample_triples(hmm, args.n, seed=args.seed, threads=args.threads)
    path = sio.save_triples(sample, Path(args.out_dir) / "triples.tsv")
    _write_config(args, "sample")
    log.info("wrote %d triples to %s", sample.N, path)


def _load_source(args):
    """Return (distributions, N, hmm-or-None)."""
    hmm = sio.load_hmm(args.hmm) if args.hmm else None
    if args.counts:
        if not args.v:
            raise ValueError("--counts requires --v")
        counts = load_counts(args.counts, args.v)
        dists = distributions_from_counts(counts)
        return dists, counts.totals[2], hmm
    if args.triples:
        sample = sio.load_triples(args.triples)
    elif hmm is not None:
        sample = sample_triples(hmm, args.n, seed=args.seed, threads=args.threads)
        sio.save_triples(sample, Path(args.out_dir) / "triples.tsv")
    else:
        raise ValueError("need one of --hmm, --triples or --counts")
    v = hmm.v if hmm is not None else (args.v or int(sample.triples.max()) + 1)
    return empirical_joint_distributions(sample, v), sample.N, hmm


def cmd_estimate(args):
    out = Path(args.out_dir)
    dists, N, hmm = _load_source(args)
    notes = []
    lambda_plain = None
    meta = {"N": int(N), "seed": args.seed, "variant": args.variant,
            "source": "counts" if args.counts else ("triples" if args.triples else "hmm")}
    P21 = exact_joint_distributions(hmm).P21 if (args.exact_projection and hmm) else dists.P21

    if args.variant == "weighted" or args.q_mode != "none":
        q = inverse_sqrt_weights(dists.P1) if args.q_mode != "none" else np.ones(dists.v)
        U = compute_weighted_projection(P21, args.m, q)
    else:
        U = compute_projection(P21, args.m)
    if args.rescale:
        U = rescale_projection(U) if U.kind == "orthonormal-SVD" else U
        notes.append("rescaled projection: the estimate targets a row-reweighted quantity")

    if args.variant == "weighted" or args.q_mode != "none":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            model = build_weighted_model(dists, U, q, N=N)
        notes.extend(str(w.message) for w in caught)
        moments = model.moments
        try:
            U0 = compute_projection(P21, args.m)
            plain = moments_from_distributions(dists, U0, "empirical", N)
            lambda_plain = lambda_of(plain)
        except np.linalg.LinAlgError as exc:
            notes.append(f"Lambda_hat (unweighted) unavailable: {exc}")
    else:
        moments = moments_from_distributions(dists, U, "empirical", N)
        model = build_model(moments, U)

    report = diagnose(moments, N, args.epsilon, args.delta, args.t, notes)
    sio.save_model(model, out / "model.json", meta)
    result = {"report": report.to_dict()}
    if lambda_plain is not None:
        result["lambda_hat_unweighted"] = lambda_plain

    if args.variant == "hsu":
        hsu = build_hsu_model(dists, U)
        sio.save_model(hsu, out / "hsu_model.json", meta)
        try:
            a = prefix_probabilities(model, args.t)[-1]
            b = prefix_probabilities(hsu, args.t)[-1]
            result["hsu_vs_reduced_max_abs_diff"] = float(np.max(np.abs(a - b)))
        except EnumerationBudgetError as exc:
            result["hsu_vs_reduced_max_abs_diff"] = None
            report.notes.append(str(exc))
    if hmm is not None:
        try:
            result["eval"] = evaluate(hmm, model, args.t).summary()
        except EnumerationBudgetError as exc:
            report.notes.append(str(exc))

    sio.save_json(result, out / "report.json")
    _write_config(args, "estimate")
    _human(args, json.dumps(result, indent=1))


def cmd_eval(args):
    hmm = sio.load_hmm(args.hmm)
    model = sio.load_model(args.model)
    summary = evaluate(hmm, model, args.t)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval.csv").write_text(summary.to_csv(), encoding="utf-8")
    sio.save_json(summary.summary(), out / "eval_summary.json")
    _write_config(args, "eval")
    _human(args, json.dumps(summary.summary(), indent=1))


def cmd_diagnose(args):
    model = sio.load_model(args.model)
    sample = sio.load_triples(args.triples)
    inner = getattr(model, "model", model)
    dists = empirical_joint_distributions(sample, inner.U.v)
    moments = moments_from_distributions(dists, inner.U, "empirical", sample.N)
    report = diagnose(moments, sample.N, args.epsilon, args.delta, args.t)
    sio.save_json(report.to_dict(), Path(args.out_dir) / "diagnose.json")
    _write_config(args, "diagnose")
    _human(args, json.dumps(report.to_dict(), indent=1))


def _parse_m_values(text):
    if text is None or text.strip() == "":
        return []
    vals = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            vals.extend(range(int(lo), int(hi) + 1))
        else:
            vals.append(int(part))
    return vals


def cmd_plot_data(args):
    counts = load_counts(args.counts, args.v)
    curve = lambda_curve(counts, _parse_m_values(args.m_values), args.rescale, args.q_mode)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "curve.csv").write_text(curve.to_csv(), encoding="utf-8")
    _write_config(args, "plot-data")
    _human(args, curve.to_csv())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectral-hmm", description=__doc__.splitlines()[0],
                                allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out-dir", default=".", type=Path)
        sp.add_argument("--summary", action="store_true",
                        help="print a human-readable summary to stderr")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--log-level", default="INFO")

    def theory(sp):
        sp.add_argument("--epsilon", type=float, default=0.5)
        sp.add_argument("--delta", type=float, default=0.05)
        sp.add_argument("--t", type=int, default=2)

    g = sub.add_parser("generate", help="write a random or fixture HMM", allow_abbrev=False)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--v", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--family", choices=["random-dense", "random-sparse", "identity"],
                   default="random-dense")
    g.add_argument("--sparsity", type=float, default=0.3)
    g.add_argument("--name", default="hmm")
    common(g)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sample", help="draw independent triples", allow_abbrev=False)
    s.add_argument("--hmm", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    common(s)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("estimate", help="fit a model and report diagnostics", allow_abbrev=False)
    e.add_argument("--hmm")
    e.add_argument("--triples")
    e.add_argument("--counts", nargs="+")
    e.add_argument("--v", type=int)
    e.add_argument("--m", type=int, required=True)
    e.add_argument("--n", type=int, default=10**6)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--variant", choices=["reduced", "hsu", "weighted"], default="reduced")
    e.add_argument("--rescale", action="store_true")
    e.add_argument("--q-mode", choices=Q_MODES, default="none")
    e.add_argument("--exact-projection", action="store_true",
                   help="with --hmm, take U from the exact bigram matrix")
    theory(e)
    common(e)
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("eval", help="compare a saved model with the exact HMM", allow_abbrev=False)
    v.add_argument("--hmm", required=True)
    v.add_argument("--model", required=True)
    v.add_argument("--t", type=int, default=2)
    common(v)
    v.set_defaults(func=cmd_eval)

    d = sub.add_parser("diagnose", help="re-check conditions for a saved model and sample",
                       allow_abbrev=False)
    d.add_argument("--model", required=True)
    d.add_argument("--triples", required=True)
    theory(d)
    common(d)
    d.set_defaults(func=cmd_diagnose)

    c = sub.add_parser("plot-data", help="Lambda-hat and sigma_m-hat versus m", allow_abbrev=False)
    c.add_argument("--counts", nargs="+", required=True)
    c.add_argument("--v", type=int, required=True)
    c.add_argument("--m-values", default="2-6", help="e.g. '2,3,5' or '2-8'; empty for none")
    c.add_argument("--rescale", action="store_true")
    c.add_argument("--q-mode", choices=Q_MODES, default="none")
    common(c)
    c.set_defaults(func=cmd_plot_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        log.error("%s failed: %s: %s", args.command, type(exc).__name__, exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
