"""
Passages, queries and relevance judgments.

Collections are loaded from the MsMarco TSV convention, TREC qrels, or a
hard-negative JSONL file, and are treated as immutable once built.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple, Union

from .errors import IntegrityError, ParseError
from .serialization import iter_jsonl_lines, write_jsonl

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

QRELS_FORMATS = ("trec_qrels", "hardneg_jsonl")


@dataclass(frozen=True)
class Passage:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise IntegrityError("passage id must be non-empty")
        if not self.text.strip():
            raise IntegrityError(f"passage {self.id!r} has empty text")


@dataclass(frozen=True)
class Query:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise IntegrityError("query id must be non-empty")
        if not self.text.strip():
            raise IntegrityError(f"query {self.id!r} has empty text")


@dataclass(frozen=True)
class Judgments:
    """Positive and negative passage ids for one query."""

    positives: FrozenSet[str] = frozenset()
    negatives: FrozenSet[str] = frozenset()

    def __post_init__(self):
        overlap = self.positives & self.negatives
        if overlap:
            raise IntegrityError(f"passages judged both relevant and irrelevant: {sorted(overlap)}")


@dataclass(frozen=True)
class Qrels:
    judgments: Dict[str, Judgments] = field(default_factory=dict)

    def __contains__(self, query_id: str) -> bool:
        return query_id in self.judgments

    def __len__(self) -> int:
        return len(self.judgments)

    def __getitem__(self, query_id: str) -> Judgments:
        return self.judgments[query_id]

    def query_ids(self) -> List[str]:
        return sorted(self.judgments)

    def positives(self, query_id: str) -> FrozenSet[str]:
        j = self.judgments.get(query_id)
        return j.positives if j else frozenset()

    def negatives(self, query_id: str) -> FrozenSet[str]:
        j = self.judgments.get(query_id)
        return j.negatives if j else frozenset()

    def passage_ids(self) -> FrozenSet[str]:
        ids = set()
        for j in self.judgments.values():
            ids |= j.positives
            ids |= j.negatives
        return frozenset(ids)

    def relevance(self, query_id: str, passage_id: str) -> Optional[bool]:
        """True / False when judged, None otherwise."""
        if passage_id in self.positives(query_id):
            return True
        if passage_id in self.negatives(query_id):
            return False
        return None


@dataclass(frozen=True)
class Collection:
    passages: Dict[str, Passage]
    queries: Dict[str, Query]
    qrels: Qrels = field(default_factory=Qrels)

    def __post_init__(self):
        missing_queries = [qid for qid in self.qrels.query_ids() if qid not in self.queries]
        if missing_queries:
            raise IntegrityError(f"qrels reference unknown queries: {missing_queries[:5]}")
        missing_passages = sorted(pid for pid in self.qrels.passage_ids() if pid not in self.passages)
        if missing_passages:
            raise IntegrityError(f"qrels reference unknown passages: {missing_passages[:5]}")

    def with_qrels(self, qrels: Qrels) -> "Collection":
        return Collection(passages=self.passages, queries=self.queries, qrels=qrels)


def _iter_lines(path: Path) -> Iterator[Tuple[int, str]]:
    """Yield (line_no, line) without the line terminator, skipping blank lines."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw[:-1] if raw.endswith("\n") else raw
            if not line.strip():
                continue
            yield line_no, line


def _load_tsv(path: PathLike, kind: str) -> Iterator[Tuple[int, str, str]]:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{kind} file not found", str(path))
    for line_no, line in _iter_lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"expected 2 tab-separated columns, got {len(parts)}", str(path), line_no)
        item_id, text = parts
        if not item_id.strip():
            raise ParseError(f"empty {kind} id", str(path), line_no)
        if not text.strip():
            raise ParseError(f"empty {kind} text for id {item_id!r}", str(path), line_no)
        yield line_no, item_id, text


def load_passages(path: PathLike, format: str = "tsv") -> Dict[str, Passage]:
    """Load `pid<TAB>text` lines into an id -> Passage map."""
    if format != "tsv":
        raise ParseError(f"unsupported passage format: {format}")
    passages: Dict[str, Passage] = {}
    for line_no, pid, text in _load_tsv(path, "passage"):
        if pid in passages:
            raise IntegrityError(f"{path}:{line_no}: duplicate passage id {pid!r}")
        passages[pid] = Passage(pid, text)
    logger.debug("loaded %d passages from %s", len(passages), path)
    return passages


def load_queries(path: PathLike, format: str = "tsv") -> Dict[str, Query]:
    """Load `qid<TAB>text` lines into an id -> Query map."""
    if format != "tsv":
        raise ParseError(f"unsupported query format: {format}")
    queries: Dict[str, Query] = {}
    for line_no, qid, text in _load_tsv(path, "query"):
        if qid in queries:
            raise IntegrityError(f"{path}:{line_no}: duplicate query id {qid!r}")
        queries[qid] = Query(qid, text)
    logger.debug("loaded %d queries from %s", len(queries), path)
    return queries


def _iter_trec_qrels(path: Path) -> Iterator[Tuple[int, str, str, bool]]:
    for line_no, line in _iter_lines(path):
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"expected 4 columns 'qid 0 pid rel', got {len(parts)}", str(path), line_no)
        qid, _iteration, pid, rel = parts
        if rel not in ("0", "1"):
            raise ParseError(f"relevance must be 0 or 1, got {rel!r}", str(path), line_no)
        yield line_no, qid, pid, rel == "1"


def _iter_hardneg(path: Path) -> Iterator[Tuple[int, str, str, bool]]:
    for line_no, record in iter_jsonl_lines(path):
        try:
            qid = str(record["qid"])
            pos = [str(p) for p in record.get("pos", [])]
            neg = [str(p) for p in record.get("neg", [])]
        except (KeyError, TypeError) as e:
            raise ParseError(f"hard-negative record missing field: {e}", str(path), line_no) from e
        for pid in pos:
            yield line_no, qid, pid, True
        for pid in neg:
            yield line_no, qid, pid, False


def load_qrels(
    path: PathLike,
    format: str = "trec_qrels",
    passages: Optional[Mapping[str, Passage]] = None,
    queries: Optional[Mapping[str, Query]] = None,
    lenient: bool = False,
) -> Qrels:
    """
    Load relevance judgments.

    Args:
        path: qrels file
        format: 'trec_qrels' (`qid 0 pid rel`) or 'hardneg_jsonl'
        passages: when given, every referenced pid must exist in it
        queries: when given, every referenced qid must exist in it
        lenient: drop unknown ids with a warning instead of raising

    Raises:
        ParseError: malformed line
        IntegrityError: unknown id (strict mode) or a pid both positive and negative
    """
    path = Path(path)
    if not path.exists():
        raise ParseError("qrels file not found", str(path))
    if format == "trec_qrels":
        rows = _iter_trec_qrels(path)
    elif format == "hardneg_jsonl":
        rows = _iter_hardneg(path)
    else:
        raise ParseError(f"unsupported qrels format: {format}")

    pos: Dict[str, set] = {}
    neg: Dict[str, set] = {}
    dropped = 0
    for line_no, qid, pid, relevant in rows:
        unknown = None
        if queries is not None and qid not in queries:
            unknown = f"query {qid!r}"
        elif passages is not None and pid not in passages:
            unknown = f"passage {pid!r}"
        if unknown:
            if not lenient:
                raise IntegrityError(f"{path}:{line_no}: unknown {unknown}")
            dropped += 1
            continue
        (pos if relevant else neg).setdefault(qid, set()).add(pid)
        pos.setdefault(qid, set())
        neg.setdefault(qid, set())

    if dropped:
        logger.warning("dropped %d judgments referencing unknown ids in %s", dropped, path)

    judgments = {}
    for qid in sorted(pos):
        overlap = pos[qid] & neg[qid]
        if overlap:
            raise IntegrityError(f"{path}: query {qid!r} has passages judged both ways: {sorted(overlap)}")
        judgments[qid] = Judgments(frozenset(pos[qid]), frozenset(neg[qid]))
    return Qrels(judgments)


def _write_tsv(items: Iterable[Tuple[str, str]], path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for item_id, text in items:
            f.write(f"{item_id}\t{text}\n")


def write_passages(passages: Mapping[str, Passage], path: PathLike) -> None:
    _write_tsv(((p.id, p.text) for p in passages.values()), path)


def write_queries(queries: Mapping[str, Query], path: PathLike) -> None:
    _write_tsv(((q.id, q.text) for q in queries.values()), path)


def write_qrels(qrels: Qrels, path: PathLike, format: str = "trec_qrels") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "hardneg_jsonl":
        write_jsonl(
            ({"qid": qid, "pos": sorted(j.positives), "neg": sorted(j.negatives)}
             for qid, j in sorted(qrels.judgments.items())),
            path,
        )
        return
    if format != "trec_qrels":
        raise ParseError(f"unsupported qrels format: {format}")
    with open(path, "w", encoding="utf-8") as f:
        for qid, j in sorted(qrels.judgments.items()):
            for pid in sorted(j.positives):
                f.write(f"{qid} 0 {pid} 1\n")
            for pid in sorted(j.negatives):
                f.write(f"{qid} 0 {pid} 0\n")


def load_collection(
    passages_path: PathLike,
    queries_path: PathLike,
    qrels_path: Optional[PathLike] = None,
    qrels_format: str = "trec_qrels",
    lenient: bool = False,
) -> Collection:
    passages = load_passages(passages_path)
    queries = load_queries(queries_path)
    qrels = Qrels()
    if qrels_path:
        qrels = load_qrels(qrels_path, qrels_format, passages=passages, queries=queries, lenient=lenient)
    return Collection(passages=passages, queries=queries, qrels=qrels)
