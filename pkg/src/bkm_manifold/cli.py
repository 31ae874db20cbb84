"""Command-line interface.

Exit codes: 0 success, 1 a verification check failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .atlas import LuxemburgError, luxemburg_search, replay
from .geometry import GRAM_RANK_RTOL, bkm_gram
from .gibbs import center, gibbs_state
from .io import chain_from_json, dumps, load_basis, load_json, load_model, matrix_from_json, model_to_spec, save_model
from .operators import DomainError, SpectralError, build_model
from .quadrature import DEFAULT_NODES
from .suites import SUITE_NAMES, SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _parse_tolerances(items: list[str]) -> dict[str, float]:
    tol = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"tolerance must be KEY=VALUE, got {item!r}")
        try:
            tol[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"tolerance {key!r} is not a number: {value!r}") from None
    return tol


def cmd_model(args) -> int:
    matrix = matrix_from_json(load_json(args.matrix)) if args.matrix else None
    model = build_model(
        args.kind, args.dim, args.beta0, length=args.length, matrix=matrix, auto_shift=args.auto_shift
    )
    if args.out:
        save_model(model, args.out)
    else:
        print(dumps(model_to_spec(model)))
    return EXIT_OK


def cmd_verify(args) -> int:
    name = args.suite or args.suite_name
    if name is None:
        raise UsageError(f"no suite given; valid suites: {', '.join(SUITE_NAMES)}, all")
    if name != "all" and name not in SUITES:
        raise UsageError(f"unknown suite {name!r}; valid suites: {', '.join(SUITE_NAMES)}, all")
    names = SUITE_NAMES if name == "all" else (name,)
    model = load_model(args.model) if args.model else build_model("harmonic_oscillator", 8)
    tol = _parse_tolerances(args.tolerance)
    known = {k for n in names for k in SUITES[n].tolerances}
    unknown = set(tol) - known
    if unknown:
        raise UsageError(
            f"unknown tolerance keys: {', '.join(sorted(unknown))}; known: {', '.join(sorted(known))}"
        )
    reports = []
    for n in names:
        own = {k: v for k, v in tol.items() if k in SUITES[n].tolerances}
        reports.append(
            run_suite(n, model, seed=args.seed, cases=args.cases, tolerances=own, nodes=args.nodes, timing=args.timing)
        )
    payload = reports[0].to_dict() if len(reports) == 1 else {
        "suite": "all",
        "seed": args.seed,
        "ok": all(r.ok for r in reports),
        "reports": [r.to_dict() for r in reports],
    }
    _write(dumps(payload), args.out)
    if not args.json:
        for r in reports:
            status = "ok" if r.ok else f"FAILED ({len(r.failures)} checks)"
            print(f"{r.suite}: {r.cases} cases {status}", file=sys.stderr)
    return EXIT_OK if all(r.ok for r in reports) else EXIT_FAIL


def cmd_bkm_gram(args) -> int:
    model = load_model(args.model)
    state = chain_from_json(load_json(args.chain)).state if args.chain else gibbs_state(model.h0)
    raw = load_basis(args.basis)
    for i, m in enumerate(raw):
        if m.dim != state.dim:
            raise UsageError(f"basis element {i} has dimension {m.dim}, model has {state.dim}")
    vectors = [center(state, m) for m in raw]
    gram = bkm_gram(state, vectors, check_rank=False)
    notes = []
    for i, v in enumerate(vectors):
        if v.centered.frobenius() <= 1e-12 * max(1.0, v.raw.frobenius()):
            notes.append(f"basis element {i} centers to zero (multiple of the identity)")
    if gram.size:
        w, vecs = np.linalg.eigh(gram)
        min_eig = float(w[0])
        singular = w[0] <= GRAM_RANK_RTOL * max(1.0, abs(w[-1]))
        if singular:
            notes.append("Gram matrix is rank-deficient")
    else:
        min_eig, singular, vecs = None, False, None
    meta = {
        "dim": state.dim,
        "size": len(vectors),
        "min_eigenvalue": min_eig,
        "positive_definite": bool(gram.size) and not singular,
        "centering_means": [v.mean for v in vectors],
        "null_combination": vecs[:, 0].tolist() if singular else None,
        "notes": notes,
    }
    rows = "\n".join(",".join(format(float(x), ".17g") for x in row) for row in gram)
    if args.out:
        Path(args.out).write_text(rows + ("\n" if rows else ""), encoding="utf-8")
        meta_path = Path(args.meta) if args.meta else Path(args.out).with_suffix(".json")
        meta_path.write_text(dumps(meta) + "\n", encoding="utf-8")
        print(dumps(meta))
    else:
        if rows:
            print(rows)
        print(dumps(meta), file=sys.stderr)
    for note in notes:
        print(f"warning: {note}", file=sys.stderr)
    return EXIT_OK


def cmd_luxemburg(args) -> int:
    model = load_model(args.model)
    x = matrix_from_json(load_json(args.matrix))
    if x.dim != model.dim:
        raise UsageError(f"matrix dimension {x.dim} does not match model dimension {model.dim}")
    try:
        res = luxemburg_search(model, x, tol=args.tol)
    except LuxemburgError as exc:
        print(dumps({"error": str(exc), "samples": [list(s) for s in exc.samples]}), file=sys.stderr)
        return EXIT_FAIL
    if args.json:
        print(dumps({"value": res.value, "lower": res.lower, "upper": res.upper, "iterations": res.iterations, "tol": args.tol}))
    else:
        print(f"r* = {res.value:.12g}  bracket [{res.lower:.12g}, {res.upper:.12g}]  iterations {res.iterations}")
    return EXIT_OK


def cmd_chain(args) -> int:
    p = chain_from_json(load_json(args.chain))
    rep = replay(p)
    payload = {
        "steps": len(p),
        "beta": p.beta,
        "replay_ok": rep.ok,
        "mismatches": list(rep.mismatches),
        "trail": [
            {"norm": a.norm, "radius": a.radius, "shift": a.shift, "beta": a.beta, "route": a.route} for a in p.trail
        ],
    }
    _write(dumps(payload), args.out)
    return EXIT_OK if rep.ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bkm-manifold", description="Relatively bounded perturbations and BKM geometry")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("model", help="write a reference Hamiltonian spec")
    m.add_argument("--kind", required=True, help="harmonic_oscillator | dirichlet_box | custom")
    m.add_argument("--dim", type=int, required=True)
    m.add_argument("--beta0", type=float, default=0.0)
    m.add_argument("--length", type=float, default=np.pi, help="box length for dirichlet_box")
    m.add_argument("--matrix", help="JSON matrix for kind=custom")
    m.add_argument("--auto-shift", action="store_true", help="shift a custom matrix so that H0 >= I")
    m.add_argument("--out")
    m.set_defaults(func=cmd_model)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite_name", nargs="?", metavar="SUITE", help=f"one of {', '.join(SUITE_NAMES)}, all")
    v.add_argument("--suite", help="alternative to the positional SUITE")
    v.add_argument("--model", help="operator spec (default: harmonic oscillator, dim 8)")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--cases", type=int)
    v.add_argument("--tolerance", action="append", default=[], metavar="KEY=VALUE")
    v.add_argument("--nodes", type=int, default=DEFAULT_NODES)
    v.add_argument("--timing", action="store_true", help="record runtime_ms (breaks byte-identical output)")
    v.add_argument("--json", action="store_true", help="JSON only, no status lines on stderr")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("bkm-gram", help="BKM Gram matrix of a basis at the reference state")
    g.add_argument("--model", required=True)
    g.add_argument("--basis", required=True)
    g.add_argument("--chain", help="evaluate at the endpoint of this chain instead")
    g.add_argument("--out", help="CSV path; metadata goes next to it as .json")
    g.add_argument("--meta", help="explicit metadata path")
    g.set_defaults(func=cmd_bkm_gram)

    lx = sub.add_parser("luxemburg", help="Luxemburg gauge of a perturbation")
    lx.add_argument("--model", required=True)
    lx.add_argument("--matrix", required=True)
    lx.add_argument("--tol", type=float, default=1e-8)
    lx.add_argument("--json", action="store_true")
    lx.set_defaults(func=cmd_luxemburg)

    c = sub.add_parser("chain", help="replay a chain file and print its admission trail")
    c.add_argument("--chain", required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_chain)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (ValueError, KeyError, OSError, DomainError, SpectralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
