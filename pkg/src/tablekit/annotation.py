"""Annotation model and the ``wtw-kit/1`` JSON document format.

A document looks like::

    {
      "schema": "wtw-kit/1",
      "image": {"width": 640, "height": 480},
      "tables": [
        {"id": 0,
         "cells": [
           {"id": 0, "quad": [[10, 10], [50, 10], [50, 30], [10, 30]],
            "start_row": 0, "end_row": 0, "start_col": 0, "end_col": 0}
         ]}
      ]
    }

Quads are listed in canonical corner order.  The four span fields are
optional as a group (prediction files may omit them).  Coordinates are
written with 3 fractional digits.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

from .geometry import CellQuad, GeometryError

SCHEMA_VERSION = "wtw-kit/1"
COORD_DIGITS = 3

_SPAN_KEYS = ("start_row", "end_row", "start_col", "end_col")

DOCUMENT_SCHEMA = {
    "type": "object",
    "required": ["schema", "image", "tables"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "image": {
            "type": "object",
            "required": ["width", "height"],
            "properties": {
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1},
            },
        },
        "tables": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "cells"],
                "properties": {
                    "id": {"type": "integer", "minimum": 0},
                    "cells": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["quad"],
                            "properties": {
                                "id": {"type": "integer", "minimum": 0},
                                "quad": {
                                    "type": "array", "minItems": 4, "maxItems": 4,
                                    "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                              "items": {"type": "number"}},
                                },
                                **{k: {"type": "integer", "minimum": 0} for k in _SPAN_KEYS},
                            },
                            "dependentRequired": {k: list(_SPAN_KEYS) for k in _SPAN_KEYS},
                        },
                    },
                },
            },
        },
    },
}


class AnnotationError(ValueError):
    """Invalid annotation document.  ``pointer`` is a JSON-pointer-style path."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


@dataclass
class Cell:
    id: int
    quad: CellQuad
    start_row: int | None = None
    end_row: int | None = None
    start_col: int | None = None
    end_col: int | None = None

    @property
    def has_spans(self) -> bool:
        return self.start_row is not None

    @property
    def spans(self) -> tuple[int, int, int, int]:
        return self.start_row, self.end_row, self.start_col, self.end_col

    @property
    def row_span(self) -> int:
        return self.end_row - self.start_row + 1

    @property
    def col_span(self) -> int:
        return self.end_col - self.start_col + 1


@dataclass
class Table:
    id: int
    cells: list[Cell] = field(default_factory=list)


@dataclass
class Annotation:
    image_size: tuple[int, int]  # (width, height)
    tables: list[Table] = field(default_factory=list)

    @property
    def cells(self) -> list[Cell]:
        return [c for t in self.tables for c in t.cells]

    def map_quads(self, fn) -> "Annotation":
        """Copy with every quad replaced by ``fn(quad)``; spans are kept."""
        return Annotation(self.image_size,
                          [Table(t.id, [replace(c, quad=fn(c.quad)) for c in t.cells]) for t in self.tables])


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def annotation_to_dict(a: Annotation) -> dict:
    tables = []
    for t in a.tables:
        cells = []
        for c in t.cells:
            d = {"id": c.id, "quad": [[round(float(x), COORD_DIGITS), round(float(y), COORD_DIGITS)]
                                      for x, y in c.quad.vertices]}
            if c.has_spans:
                d.update(zip(_SPAN_KEYS, (int(s) for s in c.spans)))
            cells.append(d)
        tables.append({"id": t.id, "cells": cells})
    return {"schema": SCHEMA_VERSION,
            "image": {"width": int(a.image_size[0]), "height": int(a.image_size[1])},
            "tables": tables}


def annotation_from_dict(doc) -> Annotation:
    """Validate and parse a document; raises :class:`AnnotationError`."""
    validator = jsonschema.Draft202012Validator(DOCUMENT_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        e = errors[0]
        path = list(e.absolute_path)
        if e.validator == "required":
            missing = [k for k in e.validator_value if isinstance(e.instance, dict) and k not in e.instance]
            path = path + missing[:1]
        raise AnnotationError(e.message, _pointer(path))

    tables = []
    next_id = 0
    for ti, t in enumerate(doc["tables"]):
        cells = []
        for ci, c in enumerate(t["cells"]):
            where = f"/tables/{ti}/cells/{ci}"
            try:
                quad = CellQuad.from_points(c["quad"])
            except GeometryError as exc:
                raise AnnotationError(f"cell {c.get('id', ci)}: {exc}", where + "/quad") from None
            cid = c.get("id", next_id)
            next_id = max(next_id, cid) + 1
            spans = [c.get(k) for k in _SPAN_KEYS]
            if spans[0] is not None and (spans[1] < spans[0] or spans[3] < spans[2]):
                raise AnnotationError(f"cell {cid}: end index before start index", where)
            cells.append(Cell(cid, quad, *spans))
        tables.append(Table(t["id"], cells))
    ids = [c.id for t in tables for c in t.cells]
    if len(set(ids)) != len(ids):
        raise AnnotationError("duplicate cell ids", "/tables")
    return Annotation((doc["image"]["width"], doc["image"]["height"]), tables)


def dumps_annotation(a: Annotation) -> str:
    return json.dumps(annotation_to_dict(a), indent=1)


def save_annotation(a: Annotation, path) -> None:
    Path(path).write_text(dumps_annotation(a) + "\n")


def load_annotation(path) -> Annotation:
    """Read, schema-validate and convexity-check an annotation file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"invalid JSON: {exc}") from None
    return annotation_from_dict(doc)
