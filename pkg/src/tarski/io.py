"""JSON file formats for lattices, sheaves and Kripke models, plus edge lists."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .galois import LatticeMap, identity_map, table_map
from .kripke import KripkeModel, Relation, k_exists_map
from .lattice import FiniteLattice, LatticeError, lattice_from_description
from .sheaf import Graph, NetworkSheaf, build_sheaf


class FileFormatError(ValueError):
    pass


def load_json(path) -> Any:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def file_kind(doc: Any) -> str:
    """``lattice``, ``sheaf`` or ``model``, judged by the top-level keys."""
    if isinstance(doc, dict):
        if "graph" in doc:
            return "sheaf"
        if "states" in doc:
            return "model"
        if "kind" in doc:
            return "lattice"
    raise FileFormatError("cannot tell whether this is a lattice, sheaf or model file")


class _LatticeCache:
    """Parses identical descriptions once so that equal lattices are shared."""

    def __init__(self):
        self._seen: dict[str, FiniteLattice] = {}

    def get(self, desc) -> FiniteLattice:
        key = json.dumps(desc, sort_keys=True)
        if key not in self._seen:
            self._seen[key] = lattice_from_description(desc)
        return self._seen[key]


def map_from_description(desc: dict, source: FiniteLattice, target: FiniteLattice) -> LatticeMap:
    kind = desc.get("type") if isinstance(desc, dict) else None
    if kind == "identity":
        if source != target:
            raise FileFormatError("identity map between different lattices")
        return identity_map(source)
    if kind == "table":
        return table_map(source, target, desc["image"])
    if kind == "k_exists":
        if source != target or not source.is_powerset:
            raise FileFormatError("k_exists maps act on a single powerset lattice")
        return k_exists_map(source, Relation.from_pairs(source.ground, desc["relation"]))
    raise FileFormatError(f"unknown map type {kind!r}")


def map_to_description(m: LatticeMap) -> dict:
    return {"type": "table", "image": [int(v) for v in m.image_table]}


def sheaf_from_description(doc: dict) -> NetworkSheaf:
    try:
        g = doc["graph"]
        graph = Graph(g["n"], g.get("edges", []))
        cache = _LatticeCache()
        vlat = [cache.get(d) for d in doc["vertex_lattices"]]
        elat = [cache.get(d) for d in doc["edge_lattices"]]
        if len(elat) != len(graph.edges):
            raise FileFormatError(f"{len(elat)} edge lattices for {len(graph.edges)} edges")
        if len(vlat) != graph.n:
            raise FileFormatError(f"{len(vlat)} vertex lattices for {graph.n} vertices")
        maps: dict = {}
        for entry in doc.get("maps", []):
            v = int(entry["vertex"])
            k = graph.edge_index(*entry["edge"])
            m = map_from_description(entry["map"], vlat[v], elat[k])
            key = (v, graph.edges[k])
            side = entry.get("side")
            if side is None:
                maps[key] = m
            else:
                pair = list(maps.get(key, (None, None)))
                pair["ab".index(side)] = m
                maps[key] = tuple(pair)
        for key, val in maps.items():
            if isinstance(val, tuple) and None in val:
                raise FileFormatError(f"loop {list(key[1])} has only one of its two sides")
    except KeyError as exc:
        raise FileFormatError(f"sheaf file is missing field {exc}") from None
    except (TypeError, IndexError) as exc:
        raise FileFormatError(f"malformed sheaf file: {exc}") from None
    return build_sheaf(graph, vlat, elat, maps)


def sheaf_to_description(sheaf: NetworkSheaf) -> dict:
    graph = sheaf.graph
    maps = []
    for k, (u, v) in enumerate(graph.edges):
        fu, fv = sheaf.up_maps[k]
        if u == v and fu is not fv:
            maps.append({"vertex": u, "edge": [u, v], "side": "a", "map": map_to_description(fu)})
            maps.append({"vertex": u, "edge": [u, v], "side": "b", "map": map_to_description(fv)})
        elif u == v:
            maps.append({"vertex": u, "edge": [u, v], "map": map_to_description(fu)})
        else:
            maps.append({"vertex": u, "edge": [u, v], "map": map_to_description(fu)})
            maps.append({"vertex": v, "edge": [u, v], "map": map_to_description(fv)})
    return {
        "graph": {"n": graph.n, "edges": [list(e) for e in graph.edges]},
        "vertex_lattices": [L.describe() for L in sheaf.vertex_lattices],
        "edge_lattices": [L.describe() for L in sheaf.edge_lattices],
        "maps": maps,
    }


def model_from_description(doc: dict) -> KripkeModel:
    try:
        n = int(doc["states"])
        relations = [Relation.from_pairs(n, pairs) for pairs in doc["relations"]]
        atoms = list(doc.get("atoms", []))
        valuation = doc.get("valuation")
        return KripkeModel(n, relations, atoms, valuation)
    except KeyError as exc:
        raise FileFormatError(f"model file is missing field {exc}") from None
    except (TypeError, IndexError) as exc:
        raise FileFormatError(f"malformed model file: {exc}") from None


def model_to_description(model: KripkeModel) -> dict:
    return {
        "states": model.n_states,
        "relations": [[list(p) for p in r.pairs()] for r in model.relations],
        "atoms": list(model.atoms),
        "valuation": [sorted(model.props_at(s), key=model.atoms.index) for s in range(model.n_states)],
    }


def read_edge_list(path) -> Graph:
    """Header line ``n`` then one ``i j`` pair per line; ``#`` starts a comment."""
    lines = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, line))
    if not lines:
        raise FileFormatError(f"{path}: empty edge list")
    try:
        n = int(lines[0][1])
    except ValueError:
        raise FileFormatError(f"{path}: line {lines[0][0]}: expected vertex count") from None
    edges = []
    for lineno, line in lines[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise FileFormatError(f"{path}: line {lineno}: expected 'i j'")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise FileFormatError(f"{path}: line {lineno}: vertices must be integers") from None
    return Graph(n, edges)


def format_edge_list(graph: Graph) -> str:
    return "".join([f"{graph.n}\n"] + [f"{i} {j}\n" for i, j in graph.edges])


__all__ = [
    "FileFormatError",
    "LatticeError",
    "dump_json",
    "file_kind",
    "format_edge_list",
    "load_json",
    "map_from_description",
    "model_from_description",
    "model_to_description",
    "read_edge_list",
    "sheaf_from_description",
    "sheaf_to_description",
]
