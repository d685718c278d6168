"""Command-line experiment driver.

Every subcommand reads defaults, then an optional YAML/JSON ``--config``,
then ``--set key=value`` overrides, and writes CSV/JSON data plus a
``manifest.json`` (config echo, seed, content hashes, wall time) to
``--out``. Exit status: 0 on success, 2 when an acceptance check fails,
1 on errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import estimators as est
from . import meanfield as mf
from . import quantum as qm
from .core import Boundary, Graph, SpaceTimeBox
from .errors import CapacityError, InsufficientData, InvalidParameter, NumericError
from .estimators import rows_to_csv
from .io import dumps_json, git_blob_hash, matrix_to_csv, save_checkpoint, table_to_csv
from .parallel import blocks, pmap
from .rc import RCChain, RCParams
from .rng import make_rng

BLOCK = 1000


class ValidationFailed(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def graph_from_dict(desc) -> Graph:
    """``{"kind": "path", "n": 3}``, ``lattice`` (radius, dim), ``complete`` (n),
    ``single``, ``interval`` (a, b) or ``edges`` (n, edges)."""
    if isinstance(desc, str):
        desc = {"kind": desc}
    kind = desc.get("kind")
    if kind == "single":
        return Graph.single()
    if kind == "path":
        return Graph.path(int(desc["n"]))
    if kind == "interval":
        return Graph.interval(int(desc["a"]), int(desc["b"]))
    if kind == "lattice":
        return Graph.lattice(int(desc["radius"]), int(desc.get("dim", 1)))
    if kind == "complete":
        return Graph.complete(int(desc["n"]))
    if kind == "edges":
        return Graph.from_edges(int(desc["n"]), desc["edges"])
    raise InvalidParameter(f"unknown graph kind {kind!r}; use single, path, interval, lattice, complete or edges")


def _coerce(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def load_config(path, overrides) -> dict:
    cfg = {}
    if path:
        text = Path(path).read_text()
        cfg = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text) or {}
        if not isinstance(cfg, dict):
            raise InvalidParameter("config file must hold a mapping")
    for item in overrides or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise InvalidParameter(f"--set expects key=value, got {item!r}")
        cfg[key.strip()] = _coerce(val)
    return cfg


def _merge(defaults: dict, cfg: dict) -> dict:
    unknown = set(cfg) - set(defaults) - {"experiment", "seed"}
    if unknown:
        raise InvalidParameter(f"unknown config keys {sorted(unknown)}; allowed: {sorted(defaults)}")
    return {**defaults, **{k: v for k, v in cfg.items() if k in defaults}}


class Output:
    def __init__(self, out: Path):
        self.out = out
        out.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def write(self, name: str, text: str) -> None:
        data = text.encode()
        (self.out / name).write_bytes(data)
        self.files[name] = git_blob_hash(data)


# ---------------------------------------------------------------------------
# experiments


def _observe_block(lam, delta, dim, directed, box_radius, T, seed, key, trials):
    p = est.PercolationParams(lam, delta, dim, directed)
    return est.observe_many(p, box_radius, trials, make_rng(seed, *key), T=T)


def _observe(p: est.PercolationParams, box_radius, T, trials, seed, workers, tag):
    tasks = [(p.lam, p.delta, p.dim, p.directed, box_radius, T, seed, (tag, b), k) for b, k in blocks(trials, BLOCK)]
    return np.concatenate(pmap(_observe_block, tasks, workers))


PERCOLATION_DEFAULTS = {
    "lam": 0.5,
    "delta": 1.0,
    "dim": 1,
    "radii": [2, 4, 6, 8],
    "grid": [1, 2, 3, 4, 5, 6, 7, 8],
    "trials": 2000,
    "box_radius": None,
    "T": None,
}


def run_percolation(cfg, seed, workers, out: Output, directed=False) -> dict:
    c = _merge(PERCOLATION_DEFAULTS, cfg)
    p = est.PercolationParams(float(c["lam"]), float(c["delta"]), int(c["dim"]), directed)
    radii = sorted(float(r) for r in c["radii"])
    grid = sorted(float(g) for g in c["grid"])
    box_radius = int(c["box_radius"] or math.ceil(max(radii + grid)))
    T = float(c["T"] or 2 * box_radius)
    if max(radii) > box_radius or 2 * max(radii) > T:
        raise InvalidParameter(f"R={max(radii):g} exceeds the box (radius {box_radius}, height {T:g})")
    obs = _observe(p, box_radius, T, int(c["trials"]), seed, workers, 1 if directed else 0)
    theta = est.survival_table(obs[:, 1], radii, p.label())
    out.write("theta.csv", rows_to_csv(theta))
    fits, rows = {}, []
    for j, name in enumerate(est.OBSERVABLES):
        table = est.survival_table(obs[:, j], grid, f"{p.label()};{name}")
        rows += table
        try:
            f = est.fit_decay(table, name)
            fits[name] = {"rate": f.rate, "stderr": f.stderr, "ci95": f.ci(), "residuals": f.residuals}
        except InsufficientData as exc:
            fits[name] = {"error": str(exc)}
    out.write("survival.csv", rows_to_csv(rows))
    summary = {"params": p.label(), "box_radius": box_radius, "T": T, "decay_fits": fits}
    out.write("summary.json", dumps_json(summary))
    return summary


RC_DEFAULTS = {
    "graph": {"kind": "path", "n": 4},
    "T": 4.0,
    "boundary": "free",
    "lam": 1.0,
    "delta": 1.0,
    "q": 2,
    "sweeps": 10000,
    "burn_in": 1000,
    "batches": 32,
}


def _batch_se(x: np.ndarray, batches: int) -> float:
    per = len(x) // batches
    if per < 1:
        return float("nan")
    m = x[: per * batches].reshape(batches, per).mean(axis=1)
    return float(m.std(ddof=1) / math.sqrt(batches))


def run_rc_chain(cfg, seed, workers, out: Output) -> dict:
    c = _merge(RC_DEFAULTS, cfg)
    box = SpaceTimeBox(graph_from_dict(c["graph"]), float(c["T"]), Boundary.parse(str(c["boundary"])))
    params = RCParams(float(c["lam"]), float(c["delta"]), c["q"], int(c["sweeps"]), int(c["burn_in"]))
    chain = RCChain(box, params, make_rng(seed, 2))
    if params.burn_in:
        chain.run(params.burn_in)
    obs = chain.run(params.sweeps)
    names = ["cuts", "bridges", "clusters", "max_measure", "sum_sq_measure", "spin_jumps"]
    rows = [[nm, float(obs[:, i].mean()), _batch_se(obs[:, i], int(c["batches"]))] for i, nm in enumerate(names)]
    out.write("observables.csv", table_to_csv(["observable", "mean", "stderr"], rows))
    out.write("trace.csv", table_to_csv(names, [[float(v) for v in r] for r in obs]))
    save_checkpoint(out.out / "checkpoint.txt", chain, seed)
    out.files["checkpoint.txt"] = git_blob_hash((out.out / "checkpoint.txt").read_bytes())
    summary = {r[0]: {"mean": r[1], "stderr": r[2]} for r in rows}
    out.write("summary.json", dumps_json(summary))
    return summary


QUANTUM_DEFAULTS = {
    "graph": {"kind": "path", "n": 2},
    "lam": 1.0,
    "delta": 1.0,
    "beta": 1.0,
    "W": None,
    "sweeps": 100000,
    "burn_in": 1000,
    "z_max": 3.0,
}


def run_quantum_validate(cfg, seed, workers, out: Output) -> dict:
    c = _merge(QUANTUM_DEFAULTS, cfg)
    g = graph_from_dict(c["graph"])
    lam, delta, beta = float(c["lam"]), float(c["delta"]), float(c["beta"])
    exact = qm.gibbs_operator(qm.build_hamiltonian(g, lam, delta), beta)
    W = list(range(g.n)) if c["W"] is None else [int(w) for w in c["W"]]
    if len(W) < g.n:
        exact = qm.reduced_density(exact, W)
    exact.check()
    m = qm.rc_density_matrix(g, lam, delta, beta, make_rng(seed, 3), W=W, sweeps=int(c["sweeps"]), burn_in=int(c["burn_in"]))
    z = m.z_scores(exact.matrix)
    dim = exact.matrix.shape[0]
    w = len(W)
    records = []
    for r in range(dim):
        for col in range(dim):
            records.append(
                {
                    "object": f"<{qm.spins_of(r, w).tolist()}|rho|{qm.spins_of(col, w).tolist()}>",
                    "row": r,
                    "col": col,
                    "exact": float(exact.matrix[r, col]),
                    "estimate": float(m.estimate[r, col]),
                    "stderr": float(m.stderr[r, col]),
                    "z": float(z[r, col]),
                }
            )
    out.write("exact.csv", matrix_to_csv(exact.matrix))
    out.write("estimate.csv", matrix_to_csv(m.estimate))
    out.write("stderr.csv", matrix_to_csv(m.stderr))
    max_z = float(np.max(np.abs(z)))
    report = {"W": W, "sweeps": m.sweeps, "max_abs_z": max_z, "passed": max_z <= float(c["z_max"]), "elements": records}
    out.write("report.json", dumps_json(report))
    if not report["passed"]:
        raise ValidationFailed(f"max |z| = {max_z:.2f} exceeds {c['z_max']}")
    return {"max_abs_z": max_z, "elements": len(records)}


ENTANGLEMENT_DEFAULTS = {"lam": 0.2, "delta": 1.0, "L": [2, 3, 4, 5, 6], "m": [0, 1, 2, 3], "norm_L": 2, "norm_n": 4}


def run_entanglement(cfg, seed, workers, out: Output) -> dict:
    c = _merge(ENTANGLEMENT_DEFAULTS, cfg)
    lam, delta = float(c["lam"]), float(c["delta"])
    rows = []
    for m in c["m"]:
        for L in c["L"]:
            rows.append([int(L), int(m), qm.entanglement_chain(int(L), int(m), lam, delta)])
    out.write("entropy.csv", table_to_csv(["L", "m", "S_bits"], rows))
    n = int(c["norm_n"])
    norms = [[int(m), qm.norm_difference(int(c["norm_L"]), int(m), n, lam, delta)] for m in range(n + 1)]
    out.write("norms.csv", table_to_csv(["m", "norm_diff_to_n"], norms))
    return {"entropies": len(rows), "norms": [v for _, v in norms]}


GIANT_DEFAULTS = {"n": 2000, "beta": 1.0, "lams": [0.5, 2.0], "q": 1, "replicas": 50, "model": "complete", "sweeps": 200, "burn_in": 100}


def _giant_replica(n, beta, lam, q, model, sweeps, burn_in, seed, key):
    rng = make_rng(seed, *key)
    if model == "product":
        return mf.sample_product_rc(n, beta, lam, q, rng).giant_fraction
    return mf.simulate_complete_graph(n, beta, lam, int(q), rng, sweeps, burn_in).giant_fraction


def run_meanfield(cfg, seed, workers, out: Output) -> dict:
    c = _merge(GIANT_DEFAULTS, cfg)
    n, beta, q, model = int(c["n"]), float(c["beta"]), float(c["q"]), str(c["model"])
    if model not in ("complete", "product"):
        raise InvalidParameter("model must be 'complete' or 'product'")
    rows = []
    for i, lam in enumerate(float(v) for v in c["lams"]):
        tasks = [(n, beta, lam, q, model, int(c["sweeps"]), int(c["burn_in"]), seed, (4, i, r)) for r in range(int(c["replicas"]))]
        x = np.array(pmap(_giant_replica, tasks, workers))
        rate = "upper" if model == "complete" else "product"
        pi = mf.survival_probability(beta, lam, q, rate)
        rows.append([lam, float(x.mean()), float(x.std(ddof=1)) if len(x) > 1 else 0.0, beta * pi])
    out.write("giant.csv", table_to_csv(["lam", "M_over_n_mean", "M_over_n_sd", "beta_pi"], rows))
    return {"rows": rows}


BRANCHING_DEFAULTS = {"beta": 1.0, "lams": [0.0, 0.5, 2.0], "q": 1, "model": "upper", "trees": 0}


def run_branching(cfg, seed, workers, out: Output) -> dict:
    c = _merge(BRANCHING_DEFAULTS, cfg)
    beta, q, model = float(c["beta"]), float(c["q"]), c["model"]
    rows = []
    for i, lam in enumerate(float(v) for v in c["lams"]):
        pi = mf.survival_probability(beta, lam, q, model)
        row = [beta, lam, q, mf.Fq(beta, lam, q), pi]
        if int(c["trees"]) > 0:
            p, se = mf.simulate_branching(beta, lam, q, int(c["trees"]), make_rng(seed, 5, i), model)
            row += [p, se]
        else:
            row += ["", ""]
        rows.append(row)
    out.write("branching.csv", table_to_csv(["beta", "lam", "q", "Fq", "pi", "simulated", "stderr"], rows))
    return {"rows": rows}


def run_validate(cfg, seed, workers, out: Output, level="quick") -> dict:
    from .validation import validate_suite

    only = cfg.get("only")
    results = validate_suite(level, seed, only)
    report = [{"criterion": r.number, "name": r.name, "passed": r.passed, "metrics": r.metrics, "seconds": r.seconds} for r in results]
    for r in results:
        print(r.line())
    out.write("validation.json", dumps_json([{k: v for k, v in e.items() if k != "seconds"} for e in report]))
    if not all(r.passed for r in results):
        raise ValidationFailed("failed: " + ", ".join(str(r.number) for r in results if not r.passed))
    return {"passed": len(results)}


EXPERIMENTS = {
    "percolation-decay": (lambda cfg, s, w, o: run_percolation(cfg, s, w, o, False),
                          "radius-crossing curves and decay-rate fits for undirected percolation (connectivity)"),
    "contact": (lambda cfg, s, w, o: run_percolation(cfg, s, w, o, True),
                "the same estimators for the oriented contact model (connectivity)"),
    "rc-chain": (run_rc_chain, "Swendsen-Wang chain for the continuum random-cluster model (rc_sampler)"),
    "quantum-validate": (run_quantum_validate,
                         "random-cluster estimates of (reduced) Gibbs density matrices vs exact diagonalization (quantum)"),
    "entanglement-sweep": (run_entanglement, "exact ground-state entropies S_m^L and norm differences (quantum)"),
    "meanfield-giant": (run_meanfield, "largest cluster on K_n x [0, beta] against beta*pi (meanfield)"),
    "branching": (run_branching, "branching survival probability by fixed point and by simulation (meanfield)"),
}


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; status 2 is reserved for failed checks."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="spacetime-perc", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML or JSON file of parameters")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one parameter")
        p.add_argument("--seed", type=int, help="root seed (required here or in the config)")
        p.add_argument("--workers", type=int, default=1, help="processes for independent replicas")
        p.add_argument("--out", default="out", help="output directory")

    for name, (_, help_text) in EXPERIMENTS.items():
        common(sub.add_parser(name, help=help_text, description=help_text))
    p = sub.add_parser("run", help="run the experiment named by the config's 'experiment' key")
    common(p)
    p = sub.add_parser("validate", help="run the acceptance criteria")
    common(p)
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config, args.set)
        seed = args.seed if args.seed is not None else cfg.get("seed")
        if seed is None:
            raise InvalidParameter("a seed is required: pass --seed or put 'seed' in the config")
        seed = int(seed)
        command = args.command
        if command == "run":
            command = cfg.get("experiment")
            if command not in EXPERIMENTS:
                raise InvalidParameter(f"unknown experiment {command!r}; choose from {sorted(EXPERIMENTS)}")
        out = Output(Path(args.out))
        status = 0
        try:
            if command == "validate":
                summary = run_validate(cfg, seed, args.workers, out, args.level)
            else:
                summary = EXPERIMENTS[command][0](cfg, seed, args.workers, out)
        except ValidationFailed as exc:
            print(f"validation failed: {exc}", file=sys.stderr)
            summary, status = {"validation_failed": str(exc)}, 2
        manifest = {
            "command": command,
            "config": cfg,
            "seed": seed,
            "version": __version__,
            "files": out.files,
            "content_hash": git_blob_hash("".join(f"{k} {v}\n" for k, v in sorted(out.files.items())).encode()),
            "wall_seconds": time.perf_counter() - t0,
            "summary": summary,
        }
        (out.out / "manifest.json").write_text(dumps_json(manifest))
        if status == 0:
            print(f"wrote {len(out.files)} files to {out.out}")
        return status
    except (InvalidParameter, CapacityError, InsufficientData, NumericError, OSError, yaml.YAMLError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
