"""Command-line front end: ``maxent-compat {solve,marginal,range,qite,povm-check}``.

Exit codes: 0 compatible (or success), 1 usage/parse error,
2 incompatible with a verified certificate, 3 inconclusive.
"""

from __future__ import annotations

import argparse
import datetime
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from maxent_compat import __version__
from maxent_compat.errors import InconclusiveWitnessError, InvalidInstanceError, NumericalBreakdownError
from maxent_compat.io import (
    SCHEMA,
    canonical_dumps,
    dense_json,
    digest,
    load_file,
    parse_hamiltonian,
    parse_instance,
    parse_marginal,
    parse_operator_pair,
    parse_povm,
)
from maxent_compat.marginal import (
    PROJECTION_TOL,
    check_overlaps,
    localize_witness,
    overlap_witness,
    recovered_marginals,
    to_compatibility,
)
from maxent_compat.numrange import DEFAULT_SAMPLES, boundary_csv, membership, trace_boundary
from maxent_compat.operators import state_fidelity
from maxent_compat.povm import check_probabilities, sic_povm
from maxent_compat.qite import QiteConfig, prepare_thermal
from maxent_compat.solver import OBJECTIVES, OPTIMIZERS, SolverConfig, solve
from maxent_compat.witness import direction_witness, find_witness, range_witness, rank_profile, verify_witness

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCOMPATIBLE = 2
EXIT_INCONCLUSIVE = 3

COMPATIBLE = "compatible"
INCOMPATIBLE = "incompatible-certified"
INCONCLUSIVE = "inconclusive"
VERDICT_EXIT = {COMPATIBLE: EXIT_OK, INCOMPATIBLE: EXIT_INCOMPATIBLE, INCONCLUSIVE: EXIT_INCONCLUSIVE}
# batch exit code is the most severe member
_SEVERITY = [EXIT_OK, EXIT_INCOMPATIBLE, EXIT_INCONCLUSIVE, EXIT_ERROR]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run options")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--epsilon", type=float, default=1e-8)
    g.add_argument("--max-iters", type=int, default=2000)
    g.add_argument("--restarts", type=int, default=5)
    g.add_argument("--objective", choices=OBJECTIVES, default="squared")
    g.add_argument("--optimizer", choices=OPTIMIZERS, default="quasi-newton")
    g.add_argument("--output", "-o", help="write the report here instead of stdout")
    g.add_argument("--jobs", type=int, default=1, help="worker processes for a batch directory")
    g.add_argument("--no-timestamp", action="store_true", help="omit wall-clock fields from reports")

    p = _Parser(prog="maxent-compat", description="Quantum state compatibility by maximum-entropy fitting.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", parents=[common], help="decide an observable/target instance")
    s.add_argument("input", help="instance JSON file, or a directory of them")

    m = sub.add_parser("marginal", parents=[common], help="decide a quantum marginal instance")
    m.add_argument("input", help="marginal JSON file, or a directory of them")
    m.add_argument("--projection-tol", type=float, default=PROJECTION_TOL)

    r = sub.add_parser("range", parents=[common], help="trace the joint numerical range of two operators")
    r.add_argument("input", help="JSON file with operators A1 and A2")
    r.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    r.add_argument("--gap-tol", type=float, default=None)
    r.add_argument("--point", type=float, nargs=2, metavar=("X", "Y"),
                   help="report membership of this point instead of the CSV")

    q = sub.add_parser("qite", parents=[common], help="prepare a thermal state by simulated QITE")
    q.add_argument("--hamiltonian", required=True, help="JSON file with local terms")
    q.add_argument("--beta", type=float, default=1.0)
    q.add_argument("--dtau", type=float, default=0.05)
    q.add_argument("--d", type=int, default=4, dest="D")
    q.add_argument("--verify", action="store_true", help="compare against the exact Gibbs state")

    c = sub.add_parser("povm-check", parents=[common], help="check SIC-POVM invariants and probability data")
    c.add_argument("input", nargs="?", help="POVM JSON file")
    c.add_argument("--n", type=int, dest="n_qubits", help="qubit count when no file is given")
    return p


def solver_config(args) -> SolverConfig:
    return SolverConfig(
        epsilon=args.epsilon,
        max_iters=args.max_iters,
        restarts=args.restarts,
        optimizer=args.optimizer,
        seed=args.seed,
        objective=args.objective,
    )


def _config_echo(args) -> dict:
    return {
        "seed": args.seed,
        "epsilon": args.epsilon,
        "max_iters": args.max_iters,
        "restarts": args.restarts,
        "objective": args.objective,
        "optimizer": args.optimizer,
    }


def _state_json(state) -> dict:
    prof = rank_profile(state)
    return {
        "converged": state.converged,
        "loss": state.loss,
        "loss_floor": state.loss_floor,
        "coefficients": state.coefficients,
        "achieved": state.achieved,
        "iterations": state.iterations,
        "cap_saturated": state.cap_saturated,
        "restart": state.restart,
        "objective": state.objective,
        "numerical_rank": prof.numerical_rank,
    }


def _decide(instance, config):
    """Run the solve -> witness -> verify pipeline.

    Returns ``(verdict, state, witness report or None, note)``.  When the
    constructed witness is inconclusive, the fitted direction and then (for a
    target outside its observable's spectrum) a one-observable witness are
    tried before giving up.
    """
    state = solve(instance, config)
    if state.converged:
        return COMPATIBLE, state, None, None
    note = None
    try:
        rep = verify_witness(instance, find_witness(instance, state, config))
        if rep.certified:
            return INCOMPATIBLE, state, rep, None
        note = "recomputed witness margin is not positive"
    except InconclusiveWitnessError as e:
        rep, note = None, str(e)
    try:
        alt = verify_witness(instance, direction_witness(instance, state))
        if alt.certified:
            return INCOMPATIBLE, state, alt, f"certified along the fitted direction ({note})"
    except InconclusiveWitnessError:
        pass
    bad = instance.out_of_range()
    if bad:
        i, lo, hi = bad[0]
        alt = verify_witness(instance, range_witness(instance, i, lo, hi))
        if alt.certified:
            return INCOMPATIBLE, state, alt, f"target {i} lies outside the spectrum [{lo:g}, {hi:g}] ({note})"
    return INCONCLUSIVE, state, rep, note


def _report(command, args, doc, body: dict, started: float) -> dict:
    rep = {
        "schema": SCHEMA,
        "version": __version__,
        "command": command,
        "config": _config_echo(args),
        "instance_digest": digest(doc),
    }
    rep.update(body)
    if not args.no_timestamp:
        rep["timing"] = {"seconds": time.perf_counter() - started}
        rep["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return rep


def run_solve(path, args) -> tuple[dict, int]:
    started = time.perf_counter()
    doc = load_file(path)
    instance = parse_instance(doc)
    verdict, state, wit, note = _decide(instance, solver_config(args))
    body = {
        "verdict": verdict,
        "solver": None if state is None else _state_json(state),
        "witness": None if wit is None else wit.to_json(),
    }
    if note:
        body["note"] = note
    return _report("solve", args, doc, body, started), VERDICT_EXIT[verdict]


def run_marginal(path, args) -> tuple[dict, int]:
    started = time.perf_counter()
    doc = load_file(path)
    mdoc = parse_marginal(doc, projection_tol=args.projection_tol)
    mi = mdoc.instance
    parts = [list(p.qubits) for p in mi.parts]
    body: dict = {"parts": parts}
    bad = check_overlaps(mi)
    if bad:
        v = bad[0]
        loc = overlap_witness(mi, v)
        verdict = INCOMPATIBLE if loc.certified else INCONCLUSIVE
        body.update(
            verdict=verdict,
            solver=None,
            overlap=[{"first": b.first, "second": b.second, "shared": list(b.shared), "trace_distance": b.distance}
                     for b in bad],
            witness=None,
            localized=_localized_json(loc, parts),
        )
        return _report("marginal", args, doc, body, started), VERDICT_EXIT[verdict]
    red = to_compatibility(mi, check=False)
    verdict, state, wit, note = _decide(red.instance, solver_config(args))
    body.update(
        verdict=verdict,
        solver=None if state is None else _state_json(state),
        witness=None if wit is None else wit.to_json(),
        constraints=[lab.pauli for lab in red.labels],
    )
    if note:
        body["note"] = note
    if state is not None and verdict == COMPATIBLE:
        body["recovered_trace_distances"] = recovered_marginals(state.rho, mi)
        if mdoc.reference is not None:
            body["reference_fidelity"] = state_fidelity(state.rho, mdoc.reference)
    if wit is not None:
        body["localized"] = _localized_json(localize_witness(wit.coefficients, red), parts)
    return _report("marginal", args, doc, body, started), VERDICT_EXIT[verdict]


def _localized_json(loc, parts) -> dict:
    out = loc.to_json()
    out["parts"] = [{"qubits": q, "energy": e} for q, e in zip(parts, loc.part_energies)]
    out["local_hamiltonians"] = [dense_json(h) for h in loc.local_hamiltonians]
    del out["part_energies"]
    return out


def run_range(path, args) -> tuple[str, int]:
    started = time.perf_counter()
    doc = load_file(path)
    a1, a2 = parse_operator_pair(doc)
    if args.samples < 8:
        raise InvalidInstanceError("--samples must be at least 8")
    samples = trace_boundary(a1, a2, args.samples, args.gap_tol)
    if args.point is None:
        return boundary_csv(samples), EXIT_OK
    mem = membership(a1, a2, args.point, samples=args.samples, boundary=samples)
    body = {"point": list(args.point), "verdict": mem.verdict, "signed_distance": mem.distance,
            "samples": args.samples}
    code = EXIT_INCOMPATIBLE if mem.verdict == "outside" else EXIT_OK
    return canonical_dumps(_report("range", args, doc, body, started), indent=2) + "\n", code


def run_qite(path, args) -> tuple[dict, int]:
    started = time.perf_counter()
    doc = load_file(path)
    n, terms = parse_hamiltonian(doc)
    config = QiteConfig(beta=args.beta, dtau=args.dtau, D=args.D)
    run = prepare_thermal(terms, config, n_qubits=n, verify=args.verify)
    body = {
        "qite": {"beta": config.beta, "dtau": config.dtau, "steps": config.steps, "D": config.D},
        "rho": dense_json(run.rho),
        "step_norms": run.step_norms(),
        "trace_distance": run.trace_distance,
    }
    return _report("qite", args, doc, body, started), EXIT_OK


def run_povm_check(path, args) -> tuple[dict, int]:
    started = time.perf_counter()
    if path is not None:
        doc = load_file(path)
        n, probs = parse_povm(doc)
    elif args.n_qubits is not None:
        doc = {"schema": SCHEMA, "n_qubits": args.n_qubits, "povm": "sic"}
        n, probs = args.n_qubits, None
    else:
        raise InvalidInstanceError("povm-check needs a file or --n")
    povm = sic_povm(n)
    total = povm.elements.sum(axis=0)
    body = {
        "n_qubits": n,
        "outcomes": len(povm),
        "gram_rank": povm.gram_rank(),
        "completeness_deviation": float(np.abs(total - np.eye(1 << n)).max()),
        "min_eigenvalue": float(min(np.linalg.eigvalsh(e)[0] for e in povm.elements)),
        "valid": True,
    }
    if probs is not None:
        if len(probs) != len(povm):
            raise InvalidInstanceError(f"{len(probs)} probabilities for a {len(povm)}-outcome POVM")
        check_probabilities(probs)
        body["probabilities"] = {"count": len(probs), "sum": float(np.sum(probs))}
    return _report("povm-check", args, doc, body, started), EXIT_OK


_RUNNERS = {"solve": run_solve, "marginal": run_marginal}


def _batch_item(command, path, args):
    try:
        rep, code = _RUNNERS[command](path, args)
        return rep, code
    except (InvalidInstanceError, NumericalBreakdownError) as e:
        code = EXIT_ERROR if isinstance(e, InvalidInstanceError) else EXIT_INCONCLUSIVE
        return {"error": str(e)}, code


def run_batch(command, directory: Path, args) -> tuple[dict, int]:
    files = sorted(directory.glob("*.json"))
    if not files:
        raise InvalidInstanceError(f"no *.json instances in {directory}")
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_batch_item, [command] * len(files), files, [args] * len(files)))
    else:
        results = [_batch_item(command, f, args) for f in files]
    reports = {f.name: rep for f, (rep, _) in zip(files, results)}
    codes = {f.name: code for f, (_, code) in zip(files, results)}
    worst = max(codes.values(), key=_SEVERITY.index)
    return {"schema": SCHEMA, "command": command, "reports": reports, "exit_codes": codes}, worst


def _write(text: str, output):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise InvalidInstanceError("--jobs must be at least 1")
        if args.command == "range":
            text, code = run_range(args.input, args)
            _write(text, args.output)
            return code
        if args.command in _RUNNERS and Path(args.input).is_dir():
            rep, code = run_batch(args.command, Path(args.input), args)
        elif args.command in _RUNNERS:
            rep, code = _RUNNERS[args.command](args.input, args)
        elif args.command == "qite":
            rep, code = run_qite(args.hamiltonian, args)
        else:
            rep, code = run_povm_check(args.input, args)
    except InvalidInstanceError as e:
        print(f"maxent-compat: error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except NumericalBreakdownError as e:
        print(f"maxent-compat: numerical breakdown: {e}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    _write(canonical_dumps(rep, indent=2) + "\n", args.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
