"""Line-oriented persistence for every pipeline artifact.

Each file is JSON-lines: a header record carrying ``format_version``,
``kind``, and the record count, followed by one record per line. Keys are
sorted and floats use their shortest exact representation, so identical
artifacts serialize to identical bytes, and the sha256 file digest doubles
as a content digest. Restore validates version, kind, and count, so
truncated or mismatched files fail loudly as :class:`FormatError`.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .dataset import SplitSpec
from .embedding import Codebook, FusionVector, GoI
from .errors import FormatError
from .fusion_graph import FusionGraph
from .learn import Estimator
from .ranker import Rank, RankEntry, RankStore

FORMAT_VERSION = 1


def _dump(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def _write_jsonl(path: str | Path, kind: str, header: dict, records: Iterable[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records = list(records)
    head = {"format_version": FORMAT_VERSION, "kind": kind, "count": len(records)}
    head.update(header)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(_dump(head) + "\n")
        for record in records:
            fh.write(_dump(record) + "\n")
    return path


def _read_jsonl(path: str | Path, kind: str) -> tuple[dict, list[dict]]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    if not lines:
        raise FormatError(f"{path}: empty artifact file")
    try:
        header = json.loads(lines[0])
        records = [json.loads(line) for line in lines[1:] if line]
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: truncated or corrupt ({exc})") from None
    if not isinstance(header, dict) or "format_version" not in header:
        raise FormatError(f"{path}: missing format_version header")
    if header["format_version"] != FORMAT_VERSION:
        raise FormatError(
            f"{path}: format_version {header['format_version']} != {FORMAT_VERSION}"
        )
    if header.get("kind") != kind:
        raise FormatError(f"{path}: kind {header.get('kind')!r}, expected {kind!r}")
    if header.get("count") != len(records):
        raise FormatError(
            f"{path}: truncated: header says {header.get('count')} records, found {len(records)}"
        )
    return header, records


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- ranks ----------------------------------------------------------------


def _rank_record(rank: Rank) -> dict:
    return {
        "query": rank.query,
        "ranker_index": rank.ranker_index,
        "entries": [[e.response, e.raw_score, e.similarity, e.position] for e in rank.entries],
    }


def _rank_from(record: dict) -> Rank:
    entries = [
        RankEntry(resp, float(raw), None if sim is None else float(sim), int(pos))
        for resp, raw, sim, pos in record["entries"]
    ]
    return Rank(query=record["query"], ranker_index=int(record["ranker_index"]), entries=entries)


def save_rank_store(store: RankStore, path: str | Path) -> Path:
    return _write_jsonl(
        path,
        "rank_store",
        {"m": store.m, "L": store.L},
        (_rank_record(r) for r in store.all_ranks()),
    )


def load_rank_store(path: str | Path) -> RankStore:
    header, records = _read_jsonl(path, "rank_store")
    store = RankStore(m=int(header["m"]), L=int(header["L"]))
    for record in records:
        store.put(_rank_from(record))
    return store


# -- fusion graphs --------------------------------------------------------


def _graph_record(g: FusionGraph) -> dict:
    return {
        "query": g.query,
        "m": g.m,
        "L": g.L,
        "vertices": [[v, w] for v, w in sorted(g.vertices.items())],
        "edges": [[a, b, w] for (a, b), w in sorted(g.edges.items())],
    }


def _graph_from(record: dict) -> FusionGraph:
    return FusionGraph(
        query=record["query"],
        m=int(record["m"]),
        L=int(record["L"]),
        vertices={v: float(w) for v, w in record["vertices"]},
        edges={(a, b): float(w) for a, b, w in record["edges"]},
    )


def save_fusion_graphs(graphs: Iterable[FusionGraph], path: str | Path) -> Path:
    return _write_jsonl(path, "fusion_graphs", {}, (_graph_record(g) for g in graphs))


def load_fusion_graphs(path: str | Path) -> list[FusionGraph]:
    _, records = _read_jsonl(path, "fusion_graphs")
    return [_graph_from(r) for r in records]


# -- fusion vectors -------------------------------------------------------


def save_fusion_vectors(
    pairs: Iterable[tuple[str, FusionVector]], path: str | Path
) -> Path:
    pairs = list(pairs)
    kinds = {v.kind for _, v in pairs}
    dims = {v.dim for _, v in pairs}
    if len(kinds) > 1 or len(dims) > 1:
        raise FormatError(f"mixed vector kinds/dims: {sorted(kinds)}, {sorted(dims)}")
    header = {
        "vector_kind": kinds.pop() if kinds else "V",
        "dim": dims.pop() if dims else 0,
    }
    return _write_jsonl(
        path,
        "fusion_vectors",
        header,
        ({"id": sid, "entries": [[i, v] for i, v in vec.entries]} for sid, vec in pairs),
    )


def load_fusion_vectors(path: str | Path) -> list[tuple[str, FusionVector]]:
    header, records = _read_jsonl(path, "fusion_vectors")
    kind = header["vector_kind"]
    dim = int(header["dim"])
    return [
        (
            r["id"],
            FusionVector(kind=kind, dim=dim, entries=[(int(i), float(v)) for i, v in r["entries"]]),
        )
        for r in records
    ]


# -- codebook -------------------------------------------------------------


def _goi_record(g: GoI) -> dict:
    return {
        "center": g.center,
        "vertices": [[v, w] for v, w in sorted(g.vertices.items())],
        "edges": [[a, b, w] for (a, b), w in sorted(g.edges.items())],
    }


def _goi_from(record: dict) -> GoI:
    return GoI(
        center=record["center"],
        vertices={v: float(w) for v, w in record["vertices"]},
        edges={(a, b): float(w) for a, b, w in record["edges"]},
    )


def save_codebook(cb: Codebook, path: str | Path) -> Path:
    return _write_jsonl(
        path,
        "codebook",
        {"sigma": cb.sigma, "bandwidth": cb.bandwidth},
        (_goi_record(w) for w in cb.words),
    )


def load_codebook(path: str | Path) -> Codebook:
    header, records = _read_jsonl(path, "codebook")
    return Codebook(
        words=[_goi_from(r) for r in records],
        sigma=float(header["sigma"]),
        bandwidth=float(header["bandwidth"]),
    )


# -- estimator ------------------------------------------------------------


def save_estimator(est: Estimator, path: str | Path) -> Path:
    record = {
        "classes": est.classes,
        "weights": [row.tolist() for row in est.weights],
        "biases": est.biases.tolist(),
        "regularization": est.regularization,
        "objective": est.objective,
        "meta": est.meta,
    }
    return _write_jsonl(path, "estimator", {}, [record])


def load_estimator(path: str | Path) -> Estimator:
    _, records = _read_jsonl(path, "estimator")
    if len(records) != 1:
        raise FormatError(f"{path}: expected a single estimator record")
    r = records[0]
    return Estimator(
        classes=list(r["classes"]),
        weights=np.array(r["weights"], dtype=np.float64),
        biases=np.array(r["biases"], dtype=np.float64),
        regularization=float(r["regularization"]),
        objective=r["objective"],
        meta=r.get("meta", {}),
    )


# -- split ----------------------------------------------------------------


def save_split(split: SplitSpec, path: str | Path) -> Path:
    record = {"train": sorted(split.train), "test": sorted(split.test), "seed": split.seed}
    return _write_jsonl(path, "split", {}, [record])


def load_split(path: str | Path) -> SplitSpec:
    _, records = _read_jsonl(path, "split")
    if len(records) != 1:
        raise FormatError(f"{path}: expected a single split record")
    r = records[0]
    return SplitSpec(train=set(r["train"]), test=set(r["test"]), seed=int(r["seed"]))
