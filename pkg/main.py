#!/usr/bin/env python3
"""
ttconvex service - orbit lengths, convexity reports, validation and constant ledgers over HTTP
Stack: FastAPI + uvicorn + pydantic
"""

import logging
from datetime import datetime
from typing import Literal, Optional, Union

import uvicorn
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from cli import SUBCOMMANDS, _clean, as_map
from config import DEBUG, DEFAULT_BOUNDS, DEFAULT_LIMITS, HOST, PORT, TTCONVEX_LOG_LEVEL, VERSION, SearchBounds
from convexity import ConstantLedger, LedgerInputs, corpus, empirical_K, ledger
from errors import ConfigError, TTConvexError
from fgword import Automorphism, orbit_lengths, parse_automorphism
from fixtures import AUTOMORPHISMS, GRAPH_MAPS, automorphism, graph_map
from graphmap import GraphMap, map_path, parse_graph_map, validate_improved

logging.basicConfig(level=TTCONVEX_LOG_LEVEL)
logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(title="ttconvex", version=VERSION)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


class SourceRequest(BaseModel):
    fixture: Optional[str] = None
    automorphism: Optional[str] = None
    graph_map: Optional[str] = None


class OrbitRequest(SourceRequest):
    word: str
    N: int = 8
    mode: Literal["word", "cyclic"] = "word"


class ConvexityRequest(SourceRequest):
    corpus: str = "ball(3)"
    N_max: int = 12
    mode: Literal["word", "cyclic", "path", "circuit"] = "word"
    seed: int = 0


class ValidateRequest(SourceRequest):
    bounds: SearchBounds = DEFAULT_BOUNDS


def load(request: SourceRequest) -> Union[Automorphism, GraphMap]:
    if request.fixture:
        if request.fixture in AUTOMORPHISMS:
            return automorphism(request.fixture)
        return graph_map(request.fixture)
    if request.automorphism:
        return parse_automorphism(request.automorphism, name="request")
    if request.graph_map:
        return parse_graph_map(request.graph_map, name="request")
    raise ConfigError("request needs 'fixture', 'automorphism' or 'graph_map'")


def bad_request(e: Exception) -> HTTPException:
    print(f"❌ {type(e).__name__}: {e}")
    return HTTPException(status_code=400, detail=f"{type(e).__name__}: {e}")


@app.get("/api/health")
async def health_check():
    """Health check endpoint"""
    return {
        "status": "healthy",
        "version": VERSION,
        "timestamp": datetime.now().isoformat(),
    }


@app.get("/api/status")
async def get_status():
    """Service status, fixtures and limits"""
    return {
        "service": "ttconvex",
        "stack": "FastAPI + numpy + networkx",
        "fixtures": list(AUTOMORPHISMS + GRAPH_MAPS),
        "commands": list(SUBCOMMANDS),
        "limits": DEFAULT_LIMITS.model_dump(),
        "features": [
            "Free group words and automorphisms",
            "Relative train track validation",
            "Legality and Nielsen path search",
            "Bounded cancellation constants",
            "Hallway slices, markings and carving",
            "Empirical coarse convexity",
            "Constant ledger from the growth recurrences",
        ],
    }


@app.post("/api/orbit")
async def orbit(request: OrbitRequest):
    """Lengths of φ^k(w), k = 0..N"""
    try:
        source = load(request)
        if isinstance(source, Automorphism):
            lengths = orbit_lengths(source, source.alphabet.parse_word(request.word), request.N, request.mode, DEFAULT_LIMITS)
        else:
            current = source.path(request.word)
            lengths = [len(current)]
            for _ in range(request.N):
                current = map_path(source, current, 1, DEFAULT_LIMITS)
                lengths.append(len(current))
    except TTConvexError as e:
        raise bad_request(e)
    return {"word": request.word, "N": request.N, "mode": request.mode, "lengths": lengths}


@app.post("/api/convexity")
async def convexity(request: ConvexityRequest):
    """Empirical convexity constant over a corpus"""
    try:
        source = load(request)
        words = corpus(request.corpus, source, request.seed)
        if words and isinstance(words[0], str):
            raise ConfigError(f"{request.corpus} is a hallway fixture, not a corpus")
        report = empirical_K(source, words, request.N_max, request.mode, DEFAULT_LIMITS, corpus_name=request.corpus)
    except TTConvexError as e:
        raise bad_request(e)
    print(f"📊 empirical K = {report.empirical_K:.10g} ({request.corpus}, N_max={request.N_max})")
    return _clean(report.model_dump())


@app.post("/api/validate")
async def validate(request: ValidateRequest):
    """Train track property report"""
    try:
        source = load(request)
        f = as_map(source)
        report = validate_improved(f, request.bounds)
    except TTConvexError as e:
        raise bad_request(e)
    return _clean({"ok": report.ok, "failures": report.failures(), **report.model_dump()})


@app.post("/api/ledger", response_model=ConstantLedger)
async def constant_ledger(inputs: LedgerInputs):
    """Constants from the polynomial recurrences"""
    try:
        return ledger(inputs)
    except TTConvexError as e:
        raise bad_request(e)


@app.on_event("startup")
async def startup_event():
    """Load fixtures on startup"""
    print(f"🚀 Starting ttconvex service {VERSION}...")
    for name in AUTOMORPHISMS:
        automorphism(name)
    for name in GRAPH_MAPS:
        graph_map(name)
    print(f"✅ {len(AUTOMORPHISMS) + len(GRAPH_MAPS)} fixtures loaded")


if __name__ == "__main__":
    uvicorn.run(
        "main:app",
        host=HOST,
        port=PORT,
        reload=DEBUG,
        log_level="info",
    )
