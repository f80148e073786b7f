"""Plain CSV and JSON writers.  Every file is written to a temp name and renamed."""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .gasket import GasketGraph
from .spectral import NORMALIZATION, SIGN_RULE, SpectralDecomposition


def fmt(x) -> str:
    """Shortest round-trip text for a number (stable across runs)."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def atomic_write(path: Path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def csv_text(header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------- artifacts

def write_graph(graph: GasketGraph, out: Path) -> list[Path]:
    """``vertices_m{m}.csv`` and ``edges_m{m}.csv``.  ``y`` is in units of ``sqrt(3)``."""
    coords = graph.dyadic_coordinates()
    boundary = np.zeros(graph.n_vertices, dtype=bool)
    boundary[graph.boundary] = True
    rows = (
        (i, str(graph.address(i)), *coords[i], boundary[i])
        for i in range(graph.n_vertices)
    )
    m = graph.level
    v = atomic_write(
        Path(out) / f"vertices_m{m}.csv",
        csv_text(["index", "addr", "x_num", "x_den", "y_num", "y_den", "boundary"], rows),
    )
    e = atomic_write(Path(out) / f"edges_m{m}.csv", csv_text(["i", "j"], graph.edges.tolist()))
    return [v, e]


def write_spectrum(spec: SpectralDecomposition, out: Path, vectors: bool = False) -> list[Path]:
    m = spec.level
    paths = [atomic_write(
        Path(out) / f"spectrum_m{m}.csv",
        csv_text(["level", "index", "eigenvalue"],
                 ((m, j + 1, lam) for j, lam in enumerate(spec.eigenvalues))),
    )]
    if vectors:
        comments = [f"level={m}", f"N_m={spec.n}", f"normalization={NORMALIZATION}",
                    f"sign_rule={SIGN_RULE}", "rows=interior vertices in index order, columns=Phi_1..Phi_N"]
        header = ["vertex"] + [f"phi_{j + 1}" for j in range(spec.n)]
        rows = ((int(v), *spec.vectors[r]) for r, v in enumerate(spec.graph.interior))
        paths.append(atomic_write(Path(out) / f"eigenvectors_m{m}.csv", csv_text(header, rows, comments)))
    return paths


def write_field(values: np.ndarray, path: Path, m: int, s: float, seed: int, stream: int = 0) -> Path:
    comments = [f"m={m}", f"s={fmt(s)}", f"seed={seed}", f"stream={stream}"]
    return atomic_write(path, csv_text(["index", "value"], enumerate(values), comments))


def write_ensemble(values: np.ndarray, path: Path, m: int, s: float, seed: int) -> Path:
    """All samples in one file, column ``k`` being stream ``k``."""
    comments = [f"m={m}", f"s={fmt(s)}", f"seed={seed}", f"streams=0..{values.shape[1] - 1}"]
    header = ["index"] + [f"sample_{k}" for k in range(values.shape[1])]
    return atomic_write(path, csv_text(header, ((i, *row) for i, row in enumerate(values)), comments))


def write_json(obj, path: Path) -> Path:
    return atomic_write(path, json_text(obj))


def write_xy(x: Sequence[float], y: Sequence[float], path: Path,
             names: tuple[str, str] = ("x", "y")) -> Path:
    return atomic_write(path, csv_text(list(names), zip(x, y)))
