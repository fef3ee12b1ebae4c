"""Line-oriented UTF-8 model serialization.

Layout:

    TRIL3-MODEL 1
    [meta]            d, trees, depth, version, seed
    [tree i]          `node k <bias> <w...>` lines, then `leaf k <p0> <p1>`
    [ilvq]            memory scalars, running stats, `proto` lines

Every real is printed as scientific notation with 17 significant digits,
which round-trips binary64 exactly; serialize(load(text)) == text.
"""

from __future__ import annotations

import numpy as np

from .errors import ProtocolError
from .forest import Forest, SoftTree
from .ilvq import Prototype, PrototypeMemory
from .stats import RunningStats

MODEL_MAGIC = "TRIL3-MODEL 1"


def _fmt(x: float) -> str:
    return f"{float(x):.16e}"


def _fmt_vec(v: np.ndarray) -> str:
    return " ".join(_fmt(x) for x in v)


def dumps_model(forest: Forest, memory: PrototypeMemory) -> str:
    lines = [MODEL_MAGIC, "[meta]"]
    lines.append(f"d {forest.dimension}")
    lines.append(f"trees {len(forest.trees)}")
    lines.append(f"depth {forest.depth}")
    lines.append(f"version {forest.version}")
    lines.append(f"seed {forest.seed}")
    for i, tree in enumerate(forest.trees):
        lines.append(f"[tree {i}]")
        for n in range(tree.n_internal):
            lines.append(f"node {n} {_fmt(tree.biases[n])} {_fmt_vec(tree.weights[n])}")
        for l in range(tree.n_leaves):
            lines.append(f"leaf {l} {_fmt_vec(tree.leaf_probs[l])}")
    lines.append("[ilvq]")
    lines.append(f"capacity {memory.capacity}")
    lines.append(f"kappa {_fmt(memory.insertion_kappa)}")
    lines.append(f"noise_scale {_fmt(memory.noise_scale)}")
    lines.append(f"step {memory.step}")
    lines.append(f"stats_count {memory.stats.count}")
    lines.append(f"stats_mean {_fmt_vec(memory.stats.mean)}")
    lines.append(f"stats_m2 {_fmt_vec(memory.stats.m2)}")
    for i, p in enumerate(memory.prototypes):
        lines.append(f"proto {i} {p.label} {p.win_count} {p.created_at} {_fmt_vec(p.w)}")
    return "\n".join(lines) + "\n"


def _parse_floats(parts: list[str], expect: int, where: str) -> np.ndarray:
    if len(parts) != expect:
        raise ProtocolError(where, f"expected {expect} values, got {len(parts)}")
    return np.array([float(p) for p in parts])


def loads_model(text: str) -> tuple[Forest, PrototypeMemory]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != MODEL_MAGIC:
        raise ProtocolError("header", f"expected {MODEL_MAGIC!r}")

    meta: dict[str, int] = {}
    i = 1
    if i >= len(lines) or lines[i] != "[meta]":
        raise ProtocolError("meta", "missing [meta] section")
    i += 1
    while i < len(lines) and not lines[i].startswith("["):
        key, value = lines[i].split(None, 1)
        meta[key] = int(value)
        i += 1
    for key in ("d", "trees", "depth", "version", "seed"):
        if key not in meta:
            raise ProtocolError("meta", f"missing {key}")
    d, n_trees, depth = meta["d"], meta["trees"], meta["depth"]
    n_internal, n_leaves = 2 ** depth - 1, 2 ** depth

    trees: list[SoftTree] = []
    for t in range(n_trees):
        if i >= len(lines) or lines[i] != f"[tree {t}]":
            raise ProtocolError("tree", f"missing [tree {t}] section")
        i += 1
        weights = np.zeros((n_internal, d))
        biases = np.zeros(n_internal)
        leaves = np.zeros((n_leaves, 2))
        for n in range(n_internal):
            parts = lines[i].split() if i < len(lines) else []
            if parts[:2] != ["node", str(n)]:
                raise ProtocolError("node", f"expected node {n} of tree {t}")
            biases[n] = float(parts[2])
            weights[n] = _parse_floats(parts[3:], d, f"tree {t} node {n}")
            i += 1
        for l in range(n_leaves):
            parts = lines[i].split() if i < len(lines) else []
            if parts[:2] != ["leaf", str(l)]:
                raise ProtocolError("leaf", f"expected leaf {l} of tree {t}")
            leaves[l] = _parse_floats(parts[2:], 2, f"tree {t} leaf {l}")
            i += 1
        trees.append(SoftTree(depth, weights, biases, leaves))
    forest = Forest(tuple(trees), d, meta["version"], meta["seed"])

    if i >= len(lines) or lines[i] != "[ilvq]":
        raise ProtocolError("ilvq", "missing [ilvq] section")
    i += 1
    scalars: dict[str, str] = {}
    stats_mean = stats_m2 = None
    protos: list[Prototype] = []
    while i < len(lines):
        parts = lines[i].split()
        if parts[0] == "proto":
            w = _parse_floats(parts[5:], d, f"proto {parts[1]}")
            proto = Prototype(w, int(parts[2]), int(parts[3]), int(parts[4]))
            protos.append(proto)
        elif parts[0] == "stats_mean":
            stats_mean = _parse_floats(parts[1:], d, "stats_mean")
        elif parts[0] == "stats_m2":
            stats_m2 = _parse_floats(parts[1:], d, "stats_m2")
        else:
            scalars[parts[0]] = parts[1]
        i += 1
    for key in ("capacity", "kappa", "noise_scale", "step", "stats_count"):
        if key not in scalars:
            raise ProtocolError("ilvq", f"missing {key}")
    if stats_mean is None or stats_m2 is None:
        raise ProtocolError("ilvq", "missing running stats")
    memory = PrototypeMemory(
        d,
        capacity=int(scalars["capacity"]),
        insertion_kappa=float(scalars["kappa"]),
        noise_scale=float(scalars["noise_scale"]),
    )
    memory.step = int(scalars["step"])
    memory.stats = RunningStats(d, int(scalars["stats_count"]), stats_mean, stats_m2)
    memory.prototypes = protos
    return forest, memory
