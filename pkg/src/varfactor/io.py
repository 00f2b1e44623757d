"""CSV series and JSON model documents."""

from __future__ import annotations

import io as _io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PreconditionViolation, VarFactorError
from .estimation import VarModel
from .factorization import DifferenceOperator, FactorizationPair
from .matpoly import MatrixPolynomial, classify_spectrum

SCHEMA_VERSION = 1


class CsvParseError(VarFactorError, ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


@dataclass
class CsvTable:
    values: np.ndarray
    header: list[str] | None = None
    comments: list[str] = field(default_factory=list)


def parse_csv(text: str) -> CsvTable:
    """
    Comma-separated numbers, one observation per row.

    Lines starting with ``#`` are comments; blank lines are skipped; a first
    data row with a non-numeric field is taken as the header.
    """
    rows, header, comments, width = [], None, [], None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
            continue
        toks = [t.strip() for t in line.split(",")]
        if header is None and not rows and not all(_is_number(t) for t in toks):
            header = toks
            width = len(toks)
            continue
        if width is not None and len(toks) != width:
            raise CsvParseError(lineno, f"expected {width} fields, found {len(toks)}")
        width = len(toks)
        try:
            vals = [float(t) for t in toks]
        except ValueError:
            bad = next(t for t in toks if not _is_number(t))
            raise CsvParseError(lineno, f"non-numeric field {bad!r}") from None
        if not all(np.isfinite(vals)):
            raise CsvParseError(lineno, "non-finite value")
        rows.append(vals)
    if width is None:
        raise CsvParseError(1, "no data or header found")
    values = np.array(rows, dtype=float).reshape(len(rows), width)
    return CsvTable(values, header, comments)


def read_csv(path) -> CsvTable:
    return parse_csv(Path(path).read_text())


def format_csv(values: np.ndarray, header=None, comments=()) -> str:
    buf = _io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    if header is not None:
        buf.write(",".join(header) + "\n")
    for row in np.asarray(values, dtype=float):
        buf.write(",".join(repr(float(x)) for x in row) + "\n")
    return buf.getvalue()


# --------------------------------------------------------------------------
# model documents
# --------------------------------------------------------------------------

def _mat(a) -> list:
    return np.asarray(a, dtype=float).tolist()


@dataclass
class ModelDocument:
    """
    Versioned JSON representation of a fitted VAR.

    Floats are written with their shortest round-tripping representation,
    so write -> read -> write is byte-identical.
    """

    m: int
    k: int
    r: int
    Phi: list
    mu: list
    Sigma: list
    U: list | None = None
    Upsilon: list | None = None
    beta: list | None = None
    roots: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    version: int = SCHEMA_VERSION

    @classmethod
    def from_model(cls, model: VarModel, r: int, meta: dict | None = None) -> "ModelDocument":
        spec = classify_spectrum(model.poly)
        roots = [[float(z.real), float(z.imag), lab] for z, lab in zip(spec.roots, spec.labels)]
        roots.sort(key=lambda x: -abs(complex(x[0], x[1])))
        doc = cls(m=model.dim, k=model.order, r=r, Phi=_mat(model.poly.stack()),
                  mu=_mat(model.mu), Sigma=_mat(model.Sigma), roots=roots,
                  meta=dict(meta or {}))
        if model.factor is not None:
            doc.U = _mat(model.factor.diff.U)
            doc.Upsilon = _mat(model.factor.stable.stack())
        if model.long_run is not None:
            doc.beta = _mat(model.long_run.beta)
        return doc

    def to_model(self) -> VarModel:
        poly = MatrixPolynomial.from_stack(np.array(self.Phi).reshape(self.k, self.m, self.m))
        factor = None
        if self.U is not None and self.Upsilon is not None:
            ups = MatrixPolynomial.from_stack(np.array(self.Upsilon).reshape(-1, self.m, self.m))
            factor = FactorizationPair(ups, DifferenceOperator.from_matrix(np.array(self.U)),
                                       "left")
        return VarModel(poly, np.array(self.mu), np.array(self.Sigma), factor=factor)

    def to_json(self) -> str:
        body = {
            "version": self.version, "m": self.m, "k": self.k, "r": self.r,
            "Phi": self.Phi, "mu": self.mu, "Sigma": self.Sigma, "U": self.U,
            "Upsilon": self.Upsilon, "beta": self.beta, "roots": self.roots,
            "meta": self.meta,
        }
        return json.dumps(body, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str, verify: bool = True) -> "ModelDocument":
        body = json.loads(text)
        if body.get("version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported model document version {body.get('version')}")
        doc = cls(**{k: body[k] for k in ("m", "k", "r", "Phi", "mu", "Sigma", "U",
                                          "Upsilon", "beta", "roots", "meta", "version")})
        if verify and doc.meta.get("method") == "mle":
            spec = classify_spectrum(doc.to_model().poly)
            if not (spec.unit_count == doc.r and spec.unstable_count == 0):
                raise PreconditionViolation(
                    f"document violates the rank-{doc.r} unit-root constraint", roots=spec.roots)
        return doc

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def read(cls, path, verify: bool = True) -> "ModelDocument":
        return cls.from_json(Path(path).read_text(), verify)
