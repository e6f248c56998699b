"""CSV ingestion and JSON model persistence shared by the CLI."""

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .angles import wrap
from .ppca import PpcaModel

__all__ = [
    "ModelDocument",
    "read_angle_csv",
    "write_csv",
    "write_text",
    "save_model",
    "load_model",
    "file_digest",
]

MODEL_FORMAT_VERSION = 1


def _fmt(value):
    """Shortest decimal representation that round-trips the float."""
    return repr(float(value))


def write_text(path, text):
    """Write a file atomically (temp file in the target directory + rename)."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    """Write a CSV atomically; floats are emitted in round-trip form."""
    lines = [",".join(str(h) for h in header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, (float, np.floating)):
                cells.append(_fmt(cell))
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    write_text(path, "\n".join(lines) + "\n")


def read_angle_csv(path, unit="rad"):
    """Read an angle matrix CSV with a header row.

    Values are converted from the given unit to radians and wrapped into
    [0, 2*pi).  Malformed cells raise a ValueError naming the row and
    column; missing values are not allowed.

    Returns ``(column_names, Y)``.
    """
    if unit not in ("rad", "deg"):
        raise ValueError(f"unknown unit {unit!r}")
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        names = [h.strip() for h in header]
        ncol = len(names)
        if ncol == 0:
            raise ValueError(f"{path}: header row has no columns")
        data = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != ncol:
                raise ValueError(
                    f"{path}: line {lineno} has {len(row)} fields, expected {ncol}"
                )
            values = []
            for col, cell in enumerate(row):
                text = cell.strip()
                if not text:
                    raise ValueError(
                        f"{path}: line {lineno}, column {col + 1} ({names[col]}) is empty"
                    )
                try:
                    value = float(text)
                except ValueError:
                    raise ValueError(
                        f"{path}: line {lineno}, column {col + 1} ({names[col]}): "
                        f"cannot parse {text!r} as a number"
                    ) from None
                if not np.isfinite(value):
                    raise ValueError(
                        f"{path}: line {lineno}, column {col + 1} ({names[col]}): "
                        "value is not finite"
                    )
                values.append(value)
            data.append(values)
    if not data:
        raise ValueError(f"{path}: no data rows")
    Y = np.asarray(data, dtype=float)
    if unit == "deg":
        Y = Y * (np.pi / 180.0)
    return names, wrap(Y)


def file_digest(path):
    """SHA-256 of the file contents, hex encoded."""
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(eq=True)
class ModelDocument:
    """JSON-serializable snapshot of a fitted model plus provenance."""

    version: int
    D: int
    d: int
    mu: list
    W: list  # row-major: D rows of length d
    sigma2: float
    lattice_radius: int
    convergence: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @classmethod
    def from_fit(cls, fit, radius, provenance=None):
        model = fit.model
        return cls(
            version=MODEL_FORMAT_VERSION,
            D=model.dim,
            d=model.rank,
            mu=[float(v) for v in model.mu],
            W=[[float(v) for v in row] for row in model.W],
            sigma2=float(model.sigma2),
            lattice_radius=int(radius),
            convergence={
                "iterations": int(fit.n_iter),
                "converged": bool(fit.converged),
                "final_loglik": float(fit.log_likelihood),
            },
            provenance=provenance or {},
        )

    def to_model(self):
        return PpcaModel(np.asarray(self.mu, dtype=float),
                         np.asarray(self.W, dtype=float),
                         self.sigma2)

    def to_json(self):
        doc = {
            "version": self.version,
            "D": self.D,
            "d": self.d,
            "mu": self.mu,
            "W": self.W,
            "sigma2": self.sigma2,
            "lattice_radius": self.lattice_radius,
            "convergence": self.convergence,
            "provenance": self.provenance,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        try:
            return cls(
                version=int(doc["version"]),
                D=int(doc["D"]),
                d=int(doc["d"]),
                mu=list(doc["mu"]),
                W=[list(row) for row in doc["W"]],
                sigma2=float(doc["sigma2"]),
                lattice_radius=int(doc["lattice_radius"]),
                convergence=dict(doc.get("convergence", {})),
                provenance=dict(doc.get("provenance", {})),
            )
        except KeyError as exc:
            raise ValueError(f"model document is missing field {exc}") from None


def save_model(path, document):
    write_text(path, document.to_json())


def load_model(path):
    with open(path) as handle:
        return ModelDocument.from_json(handle.read())
