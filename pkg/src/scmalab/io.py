"""JSON persistence for codebooks.

A codebook document carries the factor graph and every user's dense
K x M codebook as nested ``[re, im]`` pairs. Indices in the document are
positional, so user 1 is the first entry of ``codewords``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .codebook import CodebookSet, MotherConstellation
from .graph import FactorGraph, from_matrix

CODEBOOK_FIELDS = {"K", "J", "M", "d_v", "d_f", "F", "codewords", "mother"}
MOTHER_FIELDS = {"alpha", "beta", "points"}
SUPPORT_TOL = 1e-15


class CodebookFileError(ValueError):
    """A codebook document is unreadable or inconsistent."""


def _pairs(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _complex(x, shape: tuple, what: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape != shape + (2,):
        raise CodebookFileError(f"{what}: expected shape {shape} of [re, im] pairs, got {a.shape[:-1]}")
    return a[..., 0] + 1j * a[..., 1]


def codebook_to_dict(cbs: CodebookSet) -> dict:
    g = cbs.graph
    doc = {
        "K": g.K,
        "J": g.J,
        "M": cbs.M,
        "d_v": g.d_v,
        "d_f": g.d_f,
        "F": g.F.astype(int).tolist(),
        "codewords": [_pairs(cbs.codewords[j]) for j in range(g.J)],
    }
    if cbs.mother is not None:
        doc["mother"] = {"alpha": cbs.mother.alpha, "beta": cbs.mother.beta, "points": _pairs(cbs.mother.points)}
    return doc


def codebook_from_dict(doc: dict) -> CodebookSet:
    """Rebuild a codebook set, checking every field against the graph."""
    if not isinstance(doc, dict):
        raise CodebookFileError("codebook document must be an object")
    unknown = set(doc) - CODEBOOK_FIELDS
    if unknown:
        raise CodebookFileError(f"unknown codebook field(s): {sorted(unknown)}")
    missing = CODEBOOK_FIELDS - {"mother"} - set(doc)
    if missing:
        raise CodebookFileError(f"missing codebook field(s): {sorted(missing)}")
    try:
        g: FactorGraph = from_matrix(np.asarray(doc["F"]))
    except (ValueError, TypeError) as exc:
        raise CodebookFileError(f"F: {exc}") from exc
    for key, val in (("K", g.K), ("J", g.J), ("d_v", g.d_v), ("d_f", g.d_f)):
        if doc[key] != val:
            raise CodebookFileError(f"{key}={doc[key]} disagrees with F (which gives {val})")
    M = doc["M"]
    if not isinstance(M, int) or M < 2 or M & (M - 1):
        raise CodebookFileError(f"M must be a power of two >= 2, got {M!r}")
    if len(doc["codewords"]) != g.J:
        raise CodebookFileError(f"codewords: expected {g.J} users, got {len(doc['codewords'])}")

    cw = np.stack([_complex(c, (g.K, M), f"codewords[{j + 1}]") for j, c in enumerate(doc["codewords"])])
    for j in range(g.J):
        off = np.ones(g.K, dtype=bool)
        off[list(g.zeta[j])] = False
        if np.any(np.abs(cw[j][off]) > SUPPORT_TOL):
            raise CodebookFileError(f"user {j + 1} has nonzero codeword entries outside its resources")
    cw.setflags(write=False)

    mother = None
    if doc.get("mother") is not None:
        md = doc["mother"]
        bad = set(md) - MOTHER_FIELDS
        if bad:
            raise CodebookFileError(f"unknown mother field(s): {sorted(bad)}")
        pts = _complex(md["points"], (g.d_v, M), "mother.points")
        pts.setflags(write=False)
        mother = MotherConstellation(points=pts, alpha=md.get("alpha"), beta=md.get("beta"))
    return CodebookSet(graph=g, codewords=cw, mother=mother)


def save_codebook(cbs: CodebookSet, path) -> None:
    path = Path(path)
    try:
        path.write_text(json.dumps(codebook_to_dict(cbs), indent=1) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write codebook {path}: {exc.strerror}") from exc


def load_codebook(path) -> CodebookSet:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise CodebookFileError(f"cannot read codebook {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CodebookFileError(f"{path}: malformed JSON ({exc})") from exc
    try:
        return codebook_from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise CodebookFileError(f"{path}: {exc}") from exc
    except CodebookFileError as exc:
        raise CodebookFileError(f"{path}: {exc}") from exc
