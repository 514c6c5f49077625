"""HTTP surface: /health, /classify, /generate, /bertscore.

Request handling is stateless and makes no ordering promises. Malformed
bodies map to 400, beam-limit violations to 422, inference failures to 503.
"""
from __future__ import annotations

import argparse
import logging
from dataclasses import replace

from fastapi import FastAPI, HTTPException, Request
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .config import ConfigError, ServiceConfig
from .graphstore import (
    CORE_RELATIONS,
    RANDOM_LABEL,
    GraphFormatError,
    load_relations_file,
    load_triples_file,
)
from .models import (
    CheckpointClassifier,
    CheckpointGenerator,
    ModelError,
    StubClassifier,
    StubGenerator,
    token_match_scores,
)

logger = logging.getLogger(__name__)


class ClassifyRequest(BaseModel):
    head: str
    tail: str


class GenerateRequest(BaseModel):
    source: str
    relation: str
    inverted: bool
    beam: int


class BertscoreRequest(BaseModel):
    candidate: str
    reference: str


def build_models(config: ServiceConfig):
    relations = load_relations_file(config.relations) if config.relations else CORE_RELATIONS
    if config.stub_graph:
        table = load_triples_file(config.stub_graph, relations)
        logger.info(
            "stub mode: %d triples over %d nodes, %d relations",
            len(table.keys),
            len(table.nodes),
            len(relations),
        )
        return StubClassifier(table), StubGenerator(table)
    classifier = CheckpointClassifier(
        str(config.classifier_checkpoint), relations + (RANDOM_LABEL,)
    )
    generator = CheckpointGenerator(str(config.generator_checkpoint))
    logger.info(
        "checkpoint mode: classify=%s generate=%s",
        config.classifier_checkpoint,
        config.generator_checkpoint,
    )
    return classifier, generator


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig.from_env()
    classifier, generator = build_models(config)
    mode = "stub" if config.stub_mode else "checkpoint"
    app = FastAPI(title="modelsvc", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def invalid_request(_req: Request, exc: RequestValidationError):
        # the wire contract promises 400 on malformed bodies, not the
        # framework's default 422
        return JSONResponse(status_code=400, content={"detail": jsonable_encoder(exc.errors())})

    @app.exception_handler(ModelError)
    async def model_failure(_req: Request, exc: ModelError):
        logger.error("inference failure: %s", exc)
        return JSONResponse(status_code=503, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "mode": mode, "max_beam": config.max_beam}

    @app.post("/classify")
    def classify(req: ClassifyRequest):
        return {"scores": classifier.classify(req.head, req.tail)}

    @app.post("/generate")
    def generate(req: GenerateRequest):
        if not (1 <= req.beam <= config.max_beam):
            raise HTTPException(
                status_code=422,
                detail=f"beam must be in [1, {config.max_beam}], got {req.beam}",
            )
        return {"targets": generator.generate(req.source, req.relation, req.inverted, req.beam)}

    @app.post("/bertscore")
    def bertscore(req: BertscoreRequest):
        try:
            precision, recall, f1 = token_match_scores(req.candidate, req.reference)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"precision": precision, "recall": recall, "f1": f1}

    return app


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="modelsvc",
        description="Serve /classify, /generate and /bertscore; configured via MODELSVC_* env vars.",
    )
    parser.add_argument("--bind", help="host:port to serve on (overrides MODELSVC_BIND)")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = ServiceConfig.from_env()
        if args.bind:
            config = replace(config, bind=args.bind)
        app = create_app(config)
    except (ConfigError, GraphFormatError, OSError) as exc:
        parser.error(str(exc))

    import uvicorn

    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
