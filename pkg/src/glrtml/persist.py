"""Unified model file: embedder weights and hypothesis model in one JSON document.

Floats are written with ``repr`` precision so a load/save cycle is exact, and
keys are sorted so identical models give identical bytes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .embedder import EmbedderParams
from .errors import DimensionMismatch, IoFailure, ParseFailure
from .glrt_gmm import GmmModel
from .glrt_mg import MgModel

FORMAT_VERSION = 1


@dataclass
class ModelFile:
    params: EmbedderParams
    model: object
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {"format_version": FORMAT_VERSION, "embedder": self.params.to_dict(),
                "hypothesis": self.model.to_dict(), "meta": self.meta}

    @classmethod
    def from_dict(cls, data):
        version = data.get("format_version")
        if version != FORMAT_VERSION:
            raise ParseFailure(f"unsupported format_version {version!r}")
        hyp = data["hypothesis"]
        model = {"mg": MgModel, "gmm": GmmModel}[hyp["variant"]].from_dict(hyp)
        params = EmbedderParams.from_dict(data["embedder"])
        if params.d != model.d:
            raise DimensionMismatch(f"embedder dimension {params.d} != hypothesis dimension {model.d}")
        return cls(params, model, data.get("meta", {}))


def dumps(mf: ModelFile) -> str:
    return json.dumps(mf.to_dict(), sort_keys=True, indent=1) + "\n"


def loads(text: str) -> ModelFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseFailure(exc.msg, exc.lineno) from exc
    try:
        return ModelFile.from_dict(data)
    except (ParseFailure, DimensionMismatch):
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseFailure(f"malformed model file: {exc}") from exc


def save_model(path, mf: ModelFile):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps(mf))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_model(path) -> ModelFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return loads(text)
