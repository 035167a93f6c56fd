#!/usr/bin/env python3
"""
ttconvex configuration
Environment-driven defaults plus the validated bounds objects passed through the library.
"""

import os
from typing import Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from errors import ConfigError

# Load environment variables
load_dotenv()

# Configuration
TTCONVEX_THREADS = max(1, int(os.getenv("TTCONVEX_THREADS", "1")))
TTCONVEX_MAX_WORD_LENGTH = int(os.getenv("TTCONVEX_MAX_WORD_LENGTH", str(10**7)))
TTCONVEX_MAX_ITERATIONS = int(os.getenv("TTCONVEX_MAX_ITERATIONS", "64"))
TTCONVEX_LOG_LEVEL = os.getenv("TTCONVEX_LOG_LEVEL", "INFO").upper()
HOST = os.getenv("HOST", "0.0.0.0")
PORT = int(os.getenv("PORT", 5010))
DEBUG = os.getenv("DEBUG", "false").lower() in ("1", "true", "yes")

VERSION = "1.0.0"


class ResourceLimits(BaseModel):
    """Hard caps on word length and iteration count. Exceeding either is an error."""

    model_config = ConfigDict(frozen=True)

    max_word_length: int = Field(default=TTCONVEX_MAX_WORD_LENGTH, gt=0)
    max_iterations: int = Field(default=TTCONVEX_MAX_ITERATIONS, gt=0)


class SearchBounds(BaseModel):
    """Bounds for every search that cannot be exhaustive"""

    model_config = ConfigDict(frozen=True)

    path_length: int = Field(default=6, gt=0)
    nielsen_edges: int = Field(default=64, gt=0)
    nielsen_period: int = Field(default=6, gt=0)
    nielsen_budget: int = Field(default=200_000, gt=0)
    bcc_edges: int = Field(default=4, gt=0, le=20)
    trichotomy_max_M: int = Field(default=32, gt=0)
    corpus_path_length: int = Field(default=60, gt=0)
    samples: int = Field(default=10_000, gt=0)


class RunConfig(BaseModel):
    """One CLI invocation"""

    model_config = ConfigDict(frozen=True)

    subcommand: str
    inputs: tuple[str, ...] = ()
    output: Optional[str] = None
    seed: int = 0
    format: Literal["json", "csv", "table"] = "json"
    limits: ResourceLimits = ResourceLimits()
    bounds: SearchBounds = SearchBounds()
    N_max: int = Field(default=12, ge=0)


def build(model: type[BaseModel], **values) -> BaseModel:
    """Construct a config model, reporting bad values as ConfigError"""
    try:
        return model(**{k: v for k, v in values.items() if v is not None})
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"invalid {model.__name__}.{field}: {first['msg']}") from e


DEFAULT_LIMITS = ResourceLimits()
DEFAULT_BOUNDS = SearchBounds()
