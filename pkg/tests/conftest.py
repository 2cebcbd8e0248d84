"""
Shared fixtures: the bundled toy collection, a planted retrieval corpus and a
stub model gateway served over real HTTP.
"""

import logging
import threading
from collections import defaultdict
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import orjson
import pytest

from src.config.schema import ClarisimConfig, GatewayConfig
from src.corpus import Collection, Judgments, Passage, Qrels, Query, load_collection
from src.embed import LocalEmbeddingProvider
from src.index import build_index
from src.interact.prompts import CQ_FIELDS, parse_prompt
from src.logging_config import ROOT_LOGGER

ROOT_DIR = Path(__file__).parent.parent
TOY_DIR = ROOT_DIR / "data" / "toy"

STUB_DIM = 16
PLANTED_QUERIES = 50
PLANTED_WEAK = 18
FACET_TERMS = 5


# Planted corpus
#
# Every query has two terms. Its relevant passage holds them once plus five
# words found nowhere else; one strong distractor holds them twice (so BM25
# ranks it first) plus its own five words; eighteen weak distractors hold one
# query term each.


def planted_query_terms(i: int):
    return f"topic{i:02d}a", f"topic{i:02d}b"


def build_planted_collection(n_queries: int = PLANTED_QUERIES) -> Collection:
    passages = {}
    queries = {}
    judgments = {}
    for i in range(n_queries):
        qid = f"pq{i:02d}"
        a, b = planted_query_terms(i)
        queries[qid] = Query(qid, f"{a} {b}")

        relevant = f"p{i:02d}_rel"
        words = " ".join(f"rel{i:02d}w{j}" for j in range(FACET_TERMS))
        passages[relevant] = Passage(relevant, f"{a} {b} {words}")

        strong = f"p{i:02d}_dis"
        words = " ".join(f"dis{i:02d}s{j}" for j in range(FACET_TERMS))
        passages[strong] = Passage(strong, f"{a} {a} {b} {b} {words}")

        weak_ids = []
        for d in range(PLANTED_WEAK):
            pid = f"p{i:02d}_w{d:02d}"
            term = a if d % 2 == 0 else b
            words = " ".join(f"noise{i:02d}d{d:02d}w{j}" for j in range(FACET_TERMS))
            passages[pid] = Passage(pid, f"{term} {words}")
            weak_ids.append(pid)

        judgments[qid] = Judgments(
            positives=frozenset({relevant}),
            negatives=frozenset({strong, *weak_ids[:3]}),
        )
    return Collection(passages=passages, queries=queries, qrels=Qrels(judgments))


@pytest.fixture(scope="session")
def planted_collection():
    return build_planted_collection()


@pytest.fixture(scope="session")
def planted_index(planted_collection):
    return build_index(planted_collection.passages)


@pytest.fixture(scope="session")
def planted_provider(planted_collection):
    return LocalEmbeddingProvider.from_passages(planted_collection.passages)


# Toy collection


@pytest.fixture(scope="session")
def toy_collection():
    return load_collection(TOY_DIR / "passages.tsv", TOY_DIR / "queries.tsv", TOY_DIR / "qrels.txt")


@pytest.fixture(scope="session")
def toy_index(toy_collection):
    return build_index(toy_collection.passages)


@pytest.fixture(scope="session")
def toy_provider(toy_collection):
    return LocalEmbeddingProvider.from_passages(toy_collection.passages)


@pytest.fixture
def toy_config(tmp_path):
    """Defaults pointed at the toy files with every output under tmp_path."""
    return ClarisimConfig.model_validate({
        "paths": {
            "passages": str(TOY_DIR / "passages.tsv"),
            "queries": str(TOY_DIR / "queries.tsv"),
            "qrels": str(TOY_DIR / "qrels.txt"),
            "output_dir": str(tmp_path / "output"),
            "index": str(tmp_path / "output" / "index.json"),
        },
        "run": {"show_progress": False},
    })


# Stub gateway


def _default_generate(payload):
    _query, facet = parse_prompt(payload["prompt"], CQ_FIELDS)
    return 200, {"text": f"do you want to know about {facet}?"}


def _default_embed(payload):
    provider = LocalEmbeddingProvider(dim=STUB_DIM)
    return 200, {"vectors": [v.values.tolist() for v in provider.embed(payload["texts"])]}


DEFAULT_HANDLERS = {
    "generate": _default_generate,
    "answer": lambda payload: (200, {"text": "yes"}),
    "embed": _default_embed,
    "score": lambda payload: (200, {"logprob_true": -0.5}),
}


class StubGateway:
    """
    Threaded HTTP server speaking the gateway protocol.

    ``handlers`` maps a verb to ``payload -> (status, body)``; a bytes body is
    sent verbatim. Every payload received is kept in ``requests[verb]``.
    """

    def __init__(self):
        self.handlers = dict(DEFAULT_HANDLERS)
        self.requests = defaultdict(list)
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), self._handler_class())
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def config(self, **overrides) -> GatewayConfig:
        settings = {"url": self.url, "retries": 0, "backoff_factor": 0.0, "timeout_ms": 5000}
        settings.update(overrides)
        return GatewayConfig(**settings)

    def start(self):
        self.thread.start()
        return self

    def stop(self):
        self.server.shutdown()
        self.server.server_close()

    def _handler_class(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                verb = self.path.strip("/")
                length = int(self.headers.get("Content-Length") or 0)
                payload = orjson.loads(self.rfile.read(length) or b"{}")
                stub.requests[verb].append(payload)
                handler = stub.handlers.get(verb)
                if handler is None:
                    status, body = 404, {"error": f"unknown verb {verb}"}
                else:
                    status, body = handler(payload)
                data = body if isinstance(body, bytes) else orjson.dumps(body)
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, format, *args):
                pass

        return Handler


@pytest.fixture
def stub_gateway():
    stub = StubGateway().start()
    yield stub
    stub.stop()


@pytest.fixture(autouse=True)
def reset_package_logger():
    """The CLI installs a handler on the package logger; drop it between tests."""
    yield
    logger = logging.getLogger(ROOT_LOGGER)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.propagate = True
    logger.setLevel(logging.NOTSET)
