"""``adsignal`` command line: solve, gen, bench, validate.

Exit codes: 0 success, 2 invalid input, 3 size guard refusal, 4 numerical
failure. Errors are printed to stderr prefixed with the offending field or
stage.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import AuctionInstance, CONSISTENCY_TOL, SolveReport, consistency_residual
from .errors import AdSignalError, NumericalError, SizeGuardError, ValidationError
from .rv import DEFAULT_GRID_CAP, DEFAULT_SAMPLE_CAP, FiniteOracle, FixedOracle, Regime, q_grid_size, solve_rv
from .single_minded import SingleMindedStructure

EXIT_OK, EXIT_INVALID, EXIT_SIZE, EXIT_NUMERIC = 0, 2, 3, 4
SOLVERS = ("fixed-m", "fixed-d", "single-minded", "rv")
BENCH_COLUMNS = ["instance", "solver", "status", "value", "oracle_value", "gap", "tolerance",
                 "within_tolerance", "runtime_s", "message"]
BUNDLED_PREFIX = "bundled:"


# -- instance files ----------------------------------------------------------------

@dataclass(frozen=True)
class InstanceFile:
    m: int
    lambdas: np.ndarray
    prior: np.ndarray
    valuations: np.ndarray | None = None
    single_minded: SingleMindedStructure | None = None
    distribution: FiniteOracle | None = None

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ValidationError("instance: expected a JSON object", field="instance")
        for key in ("m", "lambdas", "prior"):
            if key not in doc:
                raise ValidationError(f"{key}: missing", field=key)
        has_v, has_dist = "valuations" in doc, "distribution" in doc
        if has_v == has_dist:
            raise ValidationError("valuations: exactly one of 'valuations' and 'distribution' is required",
                                  field="valuations")
        m = doc["m"]
        if isinstance(m, bool) or not isinstance(m, int):
            raise ValidationError("m: must be an integer", field="m")
        sm = None
        if "single_minded" in doc:
            block = doc["single_minded"]
            if not isinstance(block, dict) or "groups" not in block or "deltas" not in block:
                raise ValidationError("single_minded: needs 'groups' and 'deltas'", field="single_minded")
            groups = np.asarray(block["groups"])
            if groups.dtype.kind not in "iu":
                raise ValidationError("single_minded.groups: must be integers", field="single_minded.groups")
            sm = SingleMindedStructure(groups, block["deltas"])
        if has_v:
            inst = AuctionInstance(m, doc["lambdas"], doc["prior"], doc["valuations"])
            if sm is not None and not sm.matches(inst.valuations):
                raise ValidationError("single_minded: structure does not induce the given valuations",
                                      field="single_minded")
            return cls(inst.m, inst.lambdas, inst.prior, inst.valuations, sm, None)
        dist = doc["distribution"]
        if not isinstance(dist, dict) or "matrices" not in dist:
            raise ValidationError("distribution: needs 'matrices' (and optionally 'probs')", field="distribution")
        oracle = FiniteOracle(dist["matrices"], dist.get("probs"))
        # validate shapes and the prior through a representative instance
        first = AuctionInstance(m, doc["lambdas"], doc["prior"], oracle.matrices[0])
        if sm is not None:
            raise ValidationError("single_minded: not supported together with 'distribution'", field="single_minded")
        return cls(first.m, first.lambdas, first.prior, None, None, oracle)

    def to_dict(self):
        doc = {"m": self.m, "lambdas": self.lambdas.tolist(), "prior": self.prior.tolist()}
        if self.valuations is not None:
            doc["valuations"] = self.valuations.tolist()
        if self.single_minded is not None:
            doc["single_minded"] = {"groups": self.single_minded.groups.tolist(),
                                    "deltas": self.single_minded.deltas.tolist()}
        if self.distribution is not None:
            doc["distribution"] = {"matrices": self.distribution.matrices.tolist(),
                                   "probs": self.distribution.probs.tolist()}
        return doc

    def auction(self):
        if self.valuations is None:
            raise ValidationError("valuations: this solver needs known valuations, not a distribution",
                                  field="valuations")
        return AuctionInstance(self.m, self.lambdas, self.prior, self.valuations)

    def structure(self):
        if self.single_minded is not None:
            return self.single_minded
        return infer_single_minded(self.auction().valuations)

    def oracle(self):
        return self.distribution if self.distribution is not None else FixedOracle(self.valuations)


def infer_single_minded(V):
    """Recover a single-minded structure from a valuation matrix, if it has one."""
    V = np.asarray(V, dtype=float)
    nz = V > 0
    if not np.all(nz.sum(axis=1) == 1):
        raise ValidationError("single_minded: every bidder must value exactly one state", field="single_minded")
    groups = np.argmax(nz, axis=1)
    deltas = np.ones(V.shape[1])
    for th in range(V.shape[1]):
        vals = V[groups == th, th]
        if vals.size:
            if np.ptp(vals) > 1e-12:
                raise ValidationError(f"single_minded: bidders of state {th} disagree on their value",
                                      field="single_minded")
            deltas[th] = vals[0]
    return SingleMindedStructure(groups, deltas)


def dump_json(doc):
    return json.dumps(doc, indent=2) + "\n"


def bundled_path(name):
    return resources.files("adsignal") / "examples" / name


def read_json(path):
    path = str(path)
    try:
        if path.startswith(BUNDLED_PREFIX):
            text = bundled_path(path[len(BUNDLED_PREFIX):]).read_text()
        else:
            text = Path(path).read_text()
    except (OSError, FileNotFoundError) as exc:
        raise ValidationError(f"instance: cannot read {path}: {exc.strerror or exc}", field="instance") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"instance: invalid JSON in {path}: {exc.msg}", field="instance") from exc


def load_instance(path):
    return InstanceFile.from_dict(read_json(path))


# -- solving -------------------------------------------------------------------------

def run_solver(inst: InstanceFile, solver, eps=0.1, regime="fixed-d", delta=None, seed=None,
               q_cap=DEFAULT_GRID_CAP, sample_cap=DEFAULT_SAMPLE_CAP) -> SolveReport:
    from . import kv_exact, single_minded
    if solver == "fixed-m":
        return kv_exact.solve_fixed_m(inst.auction())
    if solver == "fixed-d":
        return kv_exact.solve_fixed_d(inst.auction())
    if solver == "single-minded":
        return single_minded.solve_single_minded(inst.auction(), inst.structure(), eps)
    if solver == "rv":
        return solve_rv(inst.oracle(), inst.m, inst.lambdas, inst.prior, regime, eps, delta=delta,
                        seed=seed, q_cap=q_cap, sample_cap=sample_cap)
    raise ValidationError(f"solver: unknown solver {solver!r}", field="solver")


def report_json(report: SolveReport, prior):
    res = consistency_residual(report.scheme, prior)
    if res > CONSISTENCY_TOL:
        raise NumericalError(f"report: consistency residual {res:.3g} above {CONSISTENCY_TOL:g}", stage="report")
    return dump_json(report.to_dict())


def default_seed(value):
    if value is not None:
        return value
    env = os.environ.get("ADSIGNAL_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise ValidationError("ADSIGNAL_SEED: must be an integer", field="ADSIGNAL_SEED") from exc


def write_output(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    tmp = Path(str(out) + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, out)


# -- generators ----------------------------------------------------------------------

def _rates(rng, m):
    return np.sort(rng.random(m))[::-1]


def _prior(rng, d):
    p = rng.dirichlet(np.ones(d))
    return p / p.sum()


def generate(kind, n, m, d, seed, k=3):
    if min(n, m, d, k) < 1:
        raise ValidationError("sizes: n, m, d and k must be positive", field="sizes")
    if m > n:
        raise ValidationError("m: more slots than bidders", field="m")
    rng = np.random.default_rng(seed)
    lambdas = _rates(rng, m)
    prior = _prior(rng, d)
    if kind == "general":
        doc = {"m": m, "lambdas": lambdas.tolist(), "prior": prior.tolist(), "valuations": rng.random((n, d)).tolist()}
    elif kind == "single-minded":
        sm = SingleMindedStructure(rng.integers(0, d, n), rng.uniform(0.1, 1.0, d))
        doc = {"m": m, "lambdas": lambdas.tolist(), "prior": prior.tolist(),
               "valuations": sm.valuations().tolist(),
               "single_minded": {"groups": sm.groups.tolist(), "deltas": sm.deltas.tolist()}}
    elif kind == "finite-dist":
        probs = rng.dirichlet(np.ones(k))
        doc = {"m": m, "lambdas": lambdas.tolist(), "prior": prior.tolist(),
               "distribution": {"matrices": rng.random((k, n, d)).tolist(), "probs": (probs / probs.sum()).tolist()}}
    else:
        raise ValidationError(f"kind: unknown generator {kind!r}", field="kind")
    InstanceFile.from_dict(doc)  # generated files always validate
    return doc


# -- benchmark -------------------------------------------------------------------------

ORACLE_GRID_Q = 200


def _oracle_value(inst: InstanceFile, solver, row):
    from . import oracle
    kind = row.get("oracle", "auto")
    if kind == "none":
        return None
    if kind == "auto":
        kind = "exact_sm" if solver == "single-minded" else "grid"
    if kind == "exact_sm":
        return oracle.exact_sm_opt(inst.auction(), inst.structure())
    if kind == "grid":
        q = int(row.get("q", ORACLE_GRID_Q))
        if q_grid_size(len(inst.prior), q) > DEFAULT_GRID_CAP:
            return None
        base = AuctionInstance(inst.m, inst.lambdas, inst.prior,
                               inst.valuations if inst.valuations is not None else inst.distribution.matrices[0])
        dist = None if inst.distribution is None else (inst.distribution.matrices, inst.distribution.probs)
        return oracle.grid_opt(base, q, distribution=dist)
    raise ValidationError(f"oracle: unknown oracle {kind!r}", field="oracle")


def _default_tolerance(solver, row):
    if "tolerance" in row:
        return float(row["tolerance"])
    if solver in ("fixed-m", "fixed-d"):
        return 1e-6
    return float(row.get("eps", 0.1))


def bench_row(row, base_dir):
    name = str(row.get("instance", ""))
    solver = str(row.get("solver", ""))
    out = dict.fromkeys(BENCH_COLUMNS, "")
    out.update(instance=name, solver=solver)
    start = time.perf_counter()
    try:
        if solver not in SOLVERS:
            raise ValidationError(f"solver: unknown solver {solver!r}", field="solver")
        if name.startswith(BUNDLED_PREFIX) or os.path.isabs(name):
            path = name
        elif base_dir.startswith(BUNDLED_PREFIX):
            path = base_dir + name
        else:
            path = os.path.join(base_dir, name)
        inst = load_instance(path)
        report = run_solver(inst, solver, eps=float(row.get("eps", 0.1)), regime=row.get("regime", "fixed-d"),
                            delta=row.get("delta"), seed=row.get("seed", 0))
        consistency = consistency_residual(report.scheme, inst.prior)
        if consistency > CONSISTENCY_TOL:
            raise NumericalError(f"report: consistency residual {consistency:.3g}", stage="report")
        tol = _default_tolerance(solver, row)
        ref = _oracle_value(inst, solver, row)
        out.update(status="OK", value=f"{report.value:.12g}", tolerance=f"{tol:g}")
        if ref is not None:
            gap = ref - report.value
            out.update(oracle_value=f"{ref:.12g}", gap=f"{gap:.6g}", within_tolerance=str(gap <= tol + 1e-12))
        out["runtime_s"] = f"{time.perf_counter() - start:.4f}"
    except AdSignalError as exc:
        out.update(status="ERROR", message=str(exc), runtime_s=f"{time.perf_counter() - start:.4f}")
    except Exception as exc:  # keep the suite going; record what happened
        out.update(status="ERROR", message=f"{type(exc).__name__}: {exc}",
                   runtime_s=f"{time.perf_counter() - start:.4f}")
    return out


def _bench_row_star(args):
    return bench_row(*args)


def run_bench(suite_path, jobs=1):
    doc = read_json(suite_path)
    rows = doc.get("rows", []) if isinstance(doc, dict) else doc
    if not isinstance(rows, list):
        raise ValidationError("suite: expected a list of rows", field="suite")
    if str(suite_path).startswith(BUNDLED_PREFIX):
        base_dir = BUNDLED_PREFIX
    else:
        base_dir = os.path.dirname(os.path.abspath(suite_path))
    tasks = [(dict(r) if isinstance(r, dict) else {}, base_dir) for r in rows]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bench_row_star, tasks))
    else:
        results = [bench_row(*t) for t in tasks]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(results)
    return buf.getvalue()


# -- argparse ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="adsignal", description="Optimal public signaling for VCG ad auctions.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve an instance and write a JSON report")
    s.add_argument("solver", choices=SOLVERS)
    s.add_argument("instance", help="instance JSON file (or bundled:<name>)")
    s.add_argument("-o", "--output", default=None, help="report path (default: stdout)")
    s.add_argument("--eps", type=float, default=0.1, help="target error for the approximation schemes")
    s.add_argument("--regime", default="fixed-d", choices=[r.value for r in Regime])
    s.add_argument("--delta", type=float, default=None, help="valuation lower bound (bounded-away regime)")
    s.add_argument("--seed", type=int, default=None, help="sampling seed (default: $ADSIGNAL_SEED or 0)")
    s.add_argument("--q-cap", type=int, default=DEFAULT_GRID_CAP, help="largest posterior grid allowed")
    s.add_argument("--sample-cap", type=int, default=DEFAULT_SAMPLE_CAP, help="largest sample count allowed")

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("kind", choices=("general", "single-minded", "finite-dist"))
    g.add_argument("--n", type=int, default=4)
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--d", type=int, default=3)
    g.add_argument("--k", type=int, default=3, help="number of matrices (finite-dist)")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("-o", "--output", default=None)

    b = sub.add_parser("bench", help="run a benchmark suite and write CSV")
    b.add_argument("suite", help="suite JSON file (or bundled:suite.json)")
    b.add_argument("-o", "--output", default=None)
    b.add_argument("--jobs", type=int, default=1)

    v = sub.add_parser("validate", help="check an instance file")
    v.add_argument("instance")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            inst = load_instance(args.instance)
            seed = default_seed(args.seed)
            report = run_solver(inst, args.solver, eps=args.eps, regime=args.regime, delta=args.delta,
                                seed=seed, q_cap=args.q_cap, sample_cap=args.sample_cap)
            write_output(report_json(report, inst.prior), args.output)
        elif args.command == "gen":
            doc = generate(args.kind, args.n, args.m, args.d, default_seed(args.seed), k=args.k)
            write_output(dump_json(doc), args.output)
        elif args.command == "bench":
            write_output(run_bench(args.suite, jobs=args.jobs), args.output)
        elif args.command == "validate":
            inst = load_instance(args.instance)
            shape = (inst.valuations.shape if inst.valuations is not None else inst.distribution.matrices.shape[1:])
            print(f"ok: n={shape[0]} m={inst.m} d={shape[1]}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SizeGuardError as exc:
        print(f"size guard: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except NumericalError as exc:
        stage = f" [{exc.stage}]" if exc.stage else ""
        print(f"numerical failure{stage}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
