"""Text formats: configurations, chain checkpoints, matrices, reports.

Configuration files are line oriented::

    # spacetime_perc configuration
    BOX {"n": 2, "edges": [[0, 1]], "coords": null, "T": 1.0, "boundary": "free"}
    SEED 7
    ORIENTED 0
    CUT 0 0.25
    BRIDGE 0 1 0.5

Times carry 17 significant digits, so a write/read round trip is exact.
A checkpoint appends the chain parameters, the generator state, the unread
uniforms and ``SPIN x a b s`` piece records.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from .core import Boundary, Configuration, Graph, IntensityEnvironment, SpaceTimeBox, _sorted_pair
from .errors import CorruptConfiguration
from .rc import RCChain, RCParams, RCState, spins_from_pieces, state_from
from .rng import rng_from_state, rng_state

HEADER = "# spacetime_perc configuration"


def box_descriptor(box: SpaceTimeBox) -> dict:
    g = box.graph
    return {
        "n": int(g.n),
        "edges": g.edges.tolist(),
        "coords": None if g.coords is None else np.asarray(g.coords).tolist(),
        "T": float(box.T),
        "boundary": box.boundary.describe(),
    }


def box_from_descriptor(d: dict) -> SpaceTimeBox:
    edges = np.asarray(d["edges"], dtype=np.int64).reshape(-1, 2)
    coords = None if d.get("coords") is None else np.asarray(d["coords"])
    g = Graph.from_edges(int(d["n"]), edges, coords)
    return SpaceTimeBox(g, float(d["T"]), Boundary.parse(d.get("boundary", "free")))


def _fmt(t: float) -> str:
    return "%.17g" % t


def format_configuration(config: Configuration, box: SpaceTimeBox, seed=None) -> str:
    lines = [
        HEADER,
        "BOX " + json.dumps(box_descriptor(box), sort_keys=True),
        f"SEED {'null' if seed is None else int(seed)}",
        f"ORIENTED {int(config.oriented)}",
    ]
    lines += [f"CUT {x} {_fmt(t)}" for x, t in zip(config.cut_line.tolist(), config.cut_time.tolist())]
    src, dst = config.bridge_endpoints(box)
    lines += [f"BRIDGE {a} {b} {_fmt(t)}" for a, b, t in zip(src.tolist(), dst.tolist(), config.bridge_time.tolist())]
    return "\n".join(lines) + "\n"


def _edge_lookup(box: SpaceTimeBox, oriented: bool) -> dict:
    m = box.graph.m
    look = {}
    for e, (a, b) in enumerate(box.edges.tolist()):
        look[(a, b)] = e
        look[(b, a)] = m + e if oriented else e
    return look


def _parse_records(text: str):
    """Split into header fields and event/spin records."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise CorruptConfiguration("missing configuration header")
    head, cuts, bridges, spins = {}, [], [], []
    for no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tag, _, rest = line.partition(" ")
        try:
            if tag == "CUT":
                x, t = rest.split()
                cuts.append((int(x), float(t)))
            elif tag == "BRIDGE":
                x, y, t = rest.split()
                bridges.append((int(x), int(y), float(t)))
            elif tag == "SPIN":
                x, a, b, s = rest.split()
                spins.append((int(x), float(a), float(b), int(s)))
            elif tag in ("BOX", "CHAIN", "RNG"):
                head[tag] = json.loads(rest)
            elif tag in ("SEED", "ORIENTED", "BUFFER"):
                head[tag] = rest.strip()
            else:
                raise CorruptConfiguration(f"line {no}: unknown record {tag!r}")
        except (ValueError, json.JSONDecodeError) as exc:
            raise CorruptConfiguration(f"line {no}: {exc}") from None
    if "BOX" not in head:
        raise CorruptConfiguration("missing BOX record")
    return head, cuts, bridges, spins


def _build(head, cuts, bridges) -> tuple[Configuration, SpaceTimeBox, int | None]:
    box = box_from_descriptor(head["BOX"])
    oriented = head.get("ORIENTED", "0") == "1"
    look = _edge_lookup(box, oriented)
    try:
        owners = [look[(x, y)] for x, y, _ in bridges]
    except KeyError as exc:
        raise CorruptConfiguration(f"bridge on a non-edge {exc.args[0]}") from None
    cl, ct = _sorted_pair([c[0] for c in cuts], [c[1] for c in cuts])
    be, bt = _sorted_pair(owners, [b[2] for b in bridges])
    config = Configuration(cl, ct, be, bt, oriented)
    config.validate(box)
    seed = head.get("SEED", "null")
    return config, box, None if seed == "null" else int(seed)


def parse_configuration(text: str) -> tuple[Configuration, SpaceTimeBox, int | None]:
    head, cuts, bridges, _ = _parse_records(text)
    return _build(head, cuts, bridges)


def write_configuration(path, config: Configuration, box: SpaceTimeBox, seed=None) -> None:
    Path(path).write_text(format_configuration(config, box, seed))


def read_configuration(path) -> tuple[Configuration, SpaceTimeBox, int | None]:
    return parse_configuration(Path(path).read_text())


# ---------------------------------------------------------------------------
# chain checkpoints


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [int(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _state_from_json(d):
    st = dict(d)
    inner = dict(st["state"])
    inner["counter"] = np.array(inner["counter"], dtype=np.uint64)
    inner["key"] = np.array(inner["key"], dtype=np.uint64)
    st["state"] = inner
    st["buffer"] = np.array(st["buffer"], dtype=np.uint64)
    return st


def format_checkpoint(chain: RCChain, seed=None) -> str:
    state = chain.state()
    p = chain.params
    text = format_configuration(state.config, chain.box, seed)
    meta = {
        "lam": p.lam,
        "delta": p.delta,
        "q": int(p.q),
        "sweeps": p.sweeps,
        "burn_in": p.burn_in,
        "sweeps_done": chain.sweeps_done,
        "cut_rate": chain.env.cut_rate.tolist(),
        "bridge_rate": chain.env.bridge_rate.tolist(),
    }
    extra = [
        "CHAIN " + json.dumps(meta, sort_keys=True),
        "RNG " + json.dumps(_jsonable(rng_state(chain.rng)), sort_keys=True),
        "BUFFER " + np.ascontiguousarray(chain.U[chain.pos:], dtype="<f8").tobytes().hex(),
    ]
    for x in range(chain.box.n):
        for a, b, s in state.spins.pieces(x):
            extra.append(f"SPIN {x} {_fmt(a)} {_fmt(b)} {s}")
    return text + "\n".join(extra) + "\n"


def parse_checkpoint(text: str) -> tuple[RCChain, int | None]:
    head, cuts, bridges, spins = _parse_records(text)
    for tag in ("CHAIN", "RNG", "BUFFER"):
        if tag not in head:
            raise CorruptConfiguration(f"checkpoint lacks a {tag} record")
    config, box, seed = _build(head, cuts, bridges)
    meta = head["CHAIN"]
    params = RCParams(meta["lam"], meta["delta"], meta["q"], meta["sweeps"], meta["burn_in"])
    env = IntensityEnvironment(np.array(meta["cut_rate"]), np.array(meta["bridge_rate"]))
    pieces: dict = {}
    for x, a, b, s in spins:
        pieces.setdefault(x, []).append((a, b, s))
    field = spins_from_pieces(config, box, pieces, params.q)
    state: RCState = state_from(config, field, box)
    rng = rng_from_state(_state_from_json(head["RNG"]))
    chain = RCChain(box, params, rng, env, state)
    chain.U = np.frombuffer(bytes.fromhex(head["BUFFER"]), dtype="<f8").astype(float)
    chain.pos = 0
    chain.sweeps_done = int(meta["sweeps_done"])
    return chain, seed


def save_checkpoint(path, chain: RCChain, seed=None) -> None:
    Path(path).write_text(format_checkpoint(chain, seed))


def load_checkpoint(path) -> tuple[RCChain, int | None]:
    return parse_checkpoint(Path(path).read_text())


# ---------------------------------------------------------------------------
# tables and reports


def matrix_to_csv(a: np.ndarray) -> str:
    """Row-major CSV in basis-index order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.asarray(a):
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    return np.array([[float(v) for v in row] for row in csv.reader(io.StringIO(text)) if row])


def table_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def dumps_json(obj) -> str:
    """Deterministic JSON (sorted keys, NaN/inf as strings)."""

    def clean(o):
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, np.ndarray):
            return clean(o.tolist())
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (float, np.floating)):
            f = float(o)
            return f if np.isfinite(f) else str(f)
        if isinstance(o, np.bool_):
            return bool(o)
        return o

    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


def git_blob_hash(data: bytes) -> str:
    """The hash git assigns to a blob with this content."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
