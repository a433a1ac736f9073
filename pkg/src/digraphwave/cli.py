"""
Command-line interface.

Exit codes: 0 success, 1 invariant failure, 2 I/O or configuration error.
Each command that writes files also writes ``<out>.manifest.json`` (or the
path given by ``--manifest``) recording argv, inputs, outputs and timing;
``digraphwave rerun --manifest M`` replays it.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import resource
import signal
import sys
import time

import numpy as np

from . import __version__, align, matexp, synth, theory
from .embed import digraphwave, set_hyperparameters, standardize
from .errors import DigraphwaveError, NumericalError
from .graph import build_operator, load_graph, write_edge_list, write_graph_cache
from .io import RunManifest, sha256_file, verify_checksum, write_embedding

EXIT_OK, EXIT_INVARIANT, EXIT_IO = 0, 1, 2

log = logging.getLogger("digraphwave")


class InvariantFailure(Exception):
    pass


def _order(value):
    return value if value == "auto" else int(value)


def _floats(value):
    return [float(v) for v in value.split(",") if v]


def _ints(value):
    return [int(v) for v in value.split(",") if v]


def build_parser():
    p = argparse.ArgumentParser(prog="digraphwave", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=False):
        sp.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("embed", help="embed the nodes of a graph")
    e.add_argument("--input", required=True, help="edge list or DGWG cache")
    e.add_argument("--weighted", action="store_true")
    e.add_argument("--radius", "-R", type=int, default=3)
    e.add_argument("--dim", type=int, default=128)
    e.add_argument("--no-transpose", action="store_true")
    e.add_argument("--no-aggregate", action="store_true")
    e.add_argument("--batch-size", type=int)
    e.add_argument("--memory-budget", type=int, default=256, help="MiB for dense batch buffers")
    e.add_argument("--order", type=_order, default=matexp.DEFAULT_ORDER, help="Taylor order or 'auto'")
    e.add_argument("--precision", choices=["double", "single"], default="double")
    e.add_argument("--engine", choices=["fused", "dense"], default="fused")
    e.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    e.add_argument("--out", required=True)
    e.add_argument("--format", choices=["csv", "bin"], default="csv")
    e.add_argument("--no-standardize", action="store_true")
    e.add_argument("--shared-thresholds", "--paper-exact-thresholds", action="store_true",
                   help="reuse the original thresholds for the transposed pass")
    common(e, seed=True)

    s = sub.add_parser("synth", help="compose catalog graphs around a circular backbone")
    s.add_argument("--catalog", help="catalog directory (default: shipped subset)")
    s.add_argument("--repeats", type=int, default=10)
    s.add_argument("--noise", type=int, default=0, help="noise edges per instance")
    s.add_argument("--segment", type=int, default=5)
    s.add_argument("--undirected-backbone", action="store_true")
    s.add_argument("--out", required=True, help="output prefix")
    common(s, seed=True)

    b = sub.add_parser("ba", help="Barabasi-Albert graph")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--m", type=int, default=1)
    b.add_argument("--out", required=True, help=".tsv edge list or .dgwg cache")
    common(b, seed=True)

    a = sub.add_parser("align", help="greedy embedding alignment")
    a.add_argument("--g1", required=True)
    a.add_argument("--g2", help="second graph (default: permuted copy of g1)")
    a.add_argument("--truth", help="'node_in_g2<TAB>node_in_g1' lines (required with --g2)")
    a.add_argument("--k", type=int, default=10)
    a.add_argument("--noise", type=float, default=0.0)
    a.add_argument("--seeds", type=_ints, default=[0])
    a.add_argument("--radius", "-R", type=int, default=3)
    a.add_argument("--dim", type=int, default=128)
    a.add_argument("--weighted", action="store_true")
    a.add_argument("--weight-mode", choices=["unit", "empirical"], default="unit")
    a.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    a.add_argument("--out", help="CSV path (default: stdout)")
    common(a)

    bd = sub.add_parser("bound", help="heat containment bound Q(R+1, tau) as CSV")
    bd.add_argument("--radii", type=_ints, default=[1, 2, 3, 4, 5])
    bd.add_argument("--taus", type=_floats, default=[float(t) for t in range(1, 11)])
    bd.add_argument("--out")
    common(bd)

    ss = sub.add_parser("sstar", help="source-star graph edge list")
    ss.add_argument("--d", type=int, required=True)
    ss.add_argument("--beta", type=int, required=True)
    ss.add_argument("--ell", type=int, required=True)
    ss.add_argument("--isolated", type=int, default=0)
    ss.add_argument("--out")
    common(ss)

    v = sub.add_parser("verify", help="check diffusion invariants or an embedding checksum")
    v.add_argument("--input", help="graph to check")
    v.add_argument("--weighted", action="store_true")
    v.add_argument("--embedding", help="embedding file whose sidecar checksum to verify")
    v.add_argument("--columns", type=int, default=100, help="max columns to sample")
    v.add_argument("--taus", type=_floats, default=[1.0, 2.0, 3.0])
    v.add_argument("--tol", type=float, default=1e-10)
    common(v, seed=True)

    bn = sub.add_parser("bench", help="time embeddings of BA graphs over a size sweep")
    bn.add_argument("--sizes", type=_ints, default=[1000, 10000])
    bn.add_argument("--m", type=int, default=1)
    bn.add_argument("--repeats", type=int, default=5)
    bn.add_argument("--radius", "-R", type=int, default=3)
    bn.add_argument("--dim", type=int, default=128)
    bn.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    bn.add_argument("--timeout", type=float, help="stop after this many seconds")
    bn.add_argument("--out")
    common(bn, seed=True)

    d = sub.add_parser("dump-psi", help="write reachability columns as CSV")
    d.add_argument("--input", required=True)
    d.add_argument("--weighted", action="store_true")
    d.add_argument("--nodes", type=_ints, required=True)
    d.add_argument("--taus", type=_floats, default=[1.0])
    d.add_argument("--order", type=int, default=matexp.DEFAULT_ORDER)
    d.add_argument("--out")

    r = sub.add_parser("rerun", help="replay a run manifest")
    r.add_argument("--manifest", required=True)
    r.add_argument("--check", action="store_true", help="compare output hashes with the manifest")
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = COMMANDS[args.command]
    started = time.perf_counter()
    manifest = RunManifest(args.command, argv, {k: v for k, v in vars(args).items()},
                           [s for s in [getattr(args, "seed", None)] if s is not None] or
                           list(getattr(args, "seeds", []) or []), version=__version__)
    try:
        code = handler(args, manifest) or EXIT_OK
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OSError, DigraphwaveError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    target = getattr(args, "manifest", None) if args.command != "rerun" else None
    if target is None and args.command != "rerun" and getattr(args, "out", None):
        target = args.out + ".manifest.json"
    if target:
        manifest.finish(started).write(target)
    return code


def _record_input(manifest, path):
    manifest.inputs[path] = sha256_file(path)


def _load(manifest, path, weighted=False):
    g = load_graph(path, weighted=weighted)
    _record_input(manifest, path)
    return g


def cmd_embed(args, manifest):
    g = _load(manifest, args.input, args.weighted)
    cfg = set_hyperparameters(g, R=args.radius, k_emb=args.dim, transpose=not args.no_transpose,
                              aggregate=not args.no_aggregate, order=args.order,
                              batch_size=args.batch_size, memory_budget=args.memory_budget * 2 ** 20,
                              precision=args.precision,
                              shared_thresholds=args.shared_thresholds)
    emb = digraphwave(g, cfg, engine=args.engine, threads=args.threads)
    if not args.no_standardize:
        emb = standardize(emb)
    write_embedding(emb, args.out, args.format, extra={"seed": args.seed, "input": args.input})
    manifest.outputs[args.out] = ""
    manifest.outputs[args.out + ".json"] = ""
    log.info("wrote %s embedding to %s", emb.data.shape, args.out)


def cmd_synth(args, manifest):
    catalog = synth.load_catalog(args.catalog)
    spec = synth.CompositionSpec(catalog, args.repeats, args.noise, args.seed, args.segment,
                                 args.undirected_backbone)
    lg = synth.compose(spec)
    synth.write_labeled_graph(lg, args.out)
    for ext in (".tsv", ".labels", ".json"):
        manifest.outputs[args.out + ext] = ""


def cmd_ba(args, manifest):
    g = synth.barabasi_albert(args.n, args.m, args.seed)
    if args.out.endswith(".dgwg"):
        write_graph_cache(g, args.out)
    else:
        write_edge_list(g, args.out, weighted=False)
    manifest.outputs[args.out] = ""


def _open_out(path):
    return open(path, "w", encoding="utf-8", newline="") if path else sys.stdout


def cmd_align(args, manifest):
    ks = list(range(1, args.k + 1))
    g1 = _load(manifest, args.g1, args.weighted)
    rows = []
    if args.g2 is None:
        for seed in args.seeds:
            res = align.permuted_self_alignment(g1, args.noise, seed, ks, R=args.radius, k_emb=args.dim,
                                                threads=args.threads, weight_mode=args.weight_mode)
            rows.append(res.csv_row(ks))
    else:
        if not args.truth:
            raise DigraphwaveError("--truth is required with --g2")
        g2 = _load(manifest, args.g2, args.weighted)
        pairs = np.loadtxt(args.truth, dtype=np.int64, ndmin=2, comments="#")
        _record_input(manifest, args.truth)
        for seed in args.seeds:
            ss = np.random.SeedSequence(seed).spawn(2)
            h1 = align.add_noise_edges(g1, args.noise, np.random.default_rng(ss[0]), args.weight_mode)
            h2 = align.add_noise_edges(g2, args.noise, np.random.default_rng(ss[1]), args.weight_mode)
            e1, e2 = (digraphwave(h, set_hyperparameters(h, R=args.radius, k_emb=args.dim),
                                  threads=args.threads) for h in (h1, h2))
            acc = align.align_embeddings(e1.data, e2.data[pairs[:, 0]], pairs[:, 1], ks)
            rows.append([seed, args.noise] + [acc[k] for k in ks])
    fh = _open_out(args.out)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["seed", "p"] + [f"top{k}" for k in ks])
    w.writerows(rows)
    if args.out:
        fh.close()
        manifest.outputs[args.out] = ""


def cmd_bound(args, manifest):
    fh = _open_out(args.out)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["R", "tau", "Q"])
    for R in args.radii:
        for tau in args.taus:
            w.writerow([R, repr(tau), repr(theory.heat_containment_bound(R, tau))])
    if args.out:
        fh.close()
        manifest.outputs[args.out] = ""


def cmd_sstar(args, manifest):
    g = theory.make_source_star(theory.SourceStarSpec(args.d, args.beta, args.ell, args.isolated))
    if args.out:
        write_edge_list(g, args.out, weighted=False)
        manifest.outputs[args.out] = ""
    else:
        write_edge_list(g, sys.stdout, weighted=False)


def cmd_verify(args, manifest):
    if not args.input and not args.embedding:
        raise DigraphwaveError("verify needs --input and/or --embedding")
    results = []
    if args.embedding:
        _record_input(manifest, args.embedding)
        results.append(("checksum", verify_checksum(args.embedding), args.embedding))
    if args.input:
        g = _load(manifest, args.input, args.weighted)
        results.extend(_diffusion_checks(g, args))
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += not ok
    if failed:
        raise InvariantFailure(f"{failed} check(s) failed")


def _diffusion_checks(g, args):
    rng = np.random.default_rng(args.seed)
    cols = np.sort(rng.choice(g.n, size=min(args.columns, g.n), replace=False))
    coeffs = matexp.taylor_coefficients(args.taus)
    batch = matexp.expm_batch(build_operator(g), cols, coeffs, clamp=False)
    sums = batch.psi.sum(axis=1)
    out = [
        ("conservation", bool(np.all(np.abs(sums - 1) <= args.tol)),
         f"max |column sum - 1| = {np.abs(sums - 1).max():.3e}"),
        ("nonnegativity", bool(batch.raw_min >= -args.tol), f"min entry = {batch.raw_min:.3e}"),
    ]
    worst = np.inf
    for R in (1, 2, 3):
        for s, tau in enumerate(args.taus):
            for b, j in enumerate(cols):
                rep = theory.verify_containment(g, int(j), R, tau, batch.psi[s, :, b])
                worst = min(worst, rep.ball_heat - rep.bound)
    out.append(("containment", bool(worst >= -1e-9), f"min(ball heat - Q(R+1, tau)) = {worst:.3e}"))
    spec = theory.detect_source_star(g)
    if spec is not None:
        centre = matexp.expm_batch(build_operator(g), [0], coeffs)
        err = 0.0
        for s, tau in enumerate(args.taus):
            ref = theory.source_star_heat(spec, tau).node_values(spec)
            err = max(err, float(np.abs(centre.psi[s, :, 0] - ref).max()))
            for R in range(1, spec.ell):
                ball = theory.ball_decomposition(g, 0, R).ball
                err = max(err, abs(centre.psi[s, ball, 0].sum() - theory.heat_containment_bound(R, tau)))
        out.append(("source-star equality", err <= 1e-10, f"max deviation = {err:.3e}"))
    return out


class _Timeout(Exception):
    pass


def cmd_bench(args, manifest):
    fh = _open_out(args.out)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "m", "repeat", "seconds", "peak_mem_mb"])
    deadline = time.perf_counter() + args.timeout if args.timeout else None

    def on_alarm(signum, frame):
        raise _Timeout()

    old = signal.signal(signal.SIGALRM, on_alarm) if deadline else None
    timed_out = False
    try:
        for n in args.sizes:
            for rep in range(args.repeats):
                if deadline is not None:
                    left = deadline - time.perf_counter()
                    if left <= 0:
                        raise _Timeout()
                    signal.setitimer(signal.ITIMER_REAL, left)
                g = synth.barabasi_albert(n, args.m, args.seed + rep)
                t0 = time.perf_counter()
                cfg = set_hyperparameters(g, R=args.radius, k_emb=args.dim)
                digraphwave(g, cfg, threads=args.threads)
                secs = time.perf_counter() - t0
                peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0
                w.writerow([n, g.m, rep, repr(secs), repr(peak)])
                fh.flush()
    except _Timeout:
        timed_out = True
        print("bench: timeout reached, partial results written", file=sys.stderr)
    finally:
        if deadline is not None:
            signal.setitimer(signal.ITIMER_REAL, 0)
            signal.signal(signal.SIGALRM, old)
        if args.out:
            fh.close()
            manifest.outputs[args.out] = ""
    manifest.flags["timed_out"] = timed_out


def cmd_dump_psi(args, manifest):
    g = load_graph(args.input, weighted=args.weighted)
    coeffs = matexp.taylor_coefficients(args.taus, args.order)
    batch = matexp.expm_batch(build_operator(g), args.nodes, coeffs)
    fh = _open_out(args.out)
    matexp.write_batch_csv(batch, fh)
    if args.out:
        fh.close()


def cmd_rerun(args, manifest):
    old = RunManifest.read(args.manifest)
    code = main(old.argv)
    if code != EXIT_OK or not args.check:
        return code
    bad = [p for p, h in old.outputs.items() if h and (not os.path.exists(p) or sha256_file(p) != h)]
    for p in bad:
        print(f"FAIL output differs: {p}")
    if bad:
        raise InvariantFailure(f"{len(bad)} output(s) differ from the manifest")
    print(f"PASS {len(old.outputs)} output(s) reproduced")


COMMANDS = {
    "embed": cmd_embed, "synth": cmd_synth, "ba": cmd_ba, "align": cmd_align,
    "bound": cmd_bound, "sstar": cmd_sstar, "verify": cmd_verify, "bench": cmd_bench,
    "dump-psi": cmd_dump_psi, "rerun": cmd_rerun,
}


if __name__ == "__main__":
    sys.exit(main())
