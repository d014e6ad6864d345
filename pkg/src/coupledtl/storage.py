"""Matrix, model, label, manifest and config files.

Binary layouts (all integers and floats little-endian):

Matrix file::

    8 bytes   magic b"CTLMATRX"
    1 byte    version (1)
    matrix block

Model file::

    8 bytes   magic b"CTLMODEL"
    1 byte    version (1)
    1 byte    kind (0 = semi, 1 = symmetric)
    u64       depth k
    k times, domain 1 then domain 2:
        f64 lam, f64 epsilon, f64 mu, u64 tau (0 = dense)
        matrix block (the transform)
    matrix block (map 1->2)
    matrix block (map 2->1, symmetric models only)

Matrix block: ``u64 rows, u64 cols`` followed by ``rows*cols`` f64 values
in row-major order.

Text matrices are CSV with one sample per row and no header; they are
transposed on load so that samples become columns.
"""
from __future__ import annotations

import configparser
import csv
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .deep import KINDS, DeepTransformer, LayerConfig, LayerSchedule
from .errors import (
    ConfigError,
    DataError,
    DimensionOverflowError,
    EmptyInputError,
    MalformedHeaderError,
    ManifestError,
    NonFiniteError,
    ParseError,
)
from .fileutil import atomic_write
from .transform import DEFAULT_ITERS, DEFAULT_TOL, RegularizationParams, SparsityBudget, TransformLayer

MATRIX_MAGIC = b"CTLMATRX"
MODEL_MAGIC = b"CTLMODEL"
FORMAT_VERSION = 1
_U64 = struct.Struct("<Q")
_F64 = struct.Struct("<d")
_MAX_ELEMENTS = 1 << 40
BINARY_SUFFIXES = (".bin", ".ctlm")


# -- matrix blocks ----------------------------------------------------------

def _pack_matrix(m: np.ndarray) -> bytes:
    m = np.asarray(m, dtype=np.float64)
    rows, cols = m.shape
    return _U64.pack(rows) + _U64.pack(cols) + np.ascontiguousarray(m, dtype="<f8").tobytes()


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.pos = 0
        self.source = source

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedHeaderError(f"{self.source}: truncated while reading {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u64(self, what):
        return _U64.unpack(self.take(8, what))[0]

    def f64(self, what):
        return _F64.unpack(self.take(8, what))[0]

    def matrix(self, what="matrix") -> np.ndarray:
        rows = self.u64(f"{what} rows")
        cols = self.u64(f"{what} cols")
        if rows == 0 or cols == 0:
            raise EmptyInputError(f"{self.source}: {what} has shape ({rows}, {cols})")
        if rows > _MAX_ELEMENTS or cols > _MAX_ELEMENTS or rows * cols > _MAX_ELEMENTS:
            raise DimensionOverflowError(f"{self.source}: {what} declares {rows}x{cols} entries")
        nbytes = rows * cols * 8
        if self.pos + nbytes > len(self.data):
            raise DimensionOverflowError(
                f"{self.source}: {what} declares {rows}x{cols} but only "
                f"{len(self.data) - self.pos} payload bytes remain"
            )
        arr = np.frombuffer(self.take(nbytes, what), dtype="<f8").reshape(rows, cols)
        arr = arr.astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"{self.source}: {what} contains NaN or Inf")
        return arr

    def header(self, magic: bytes, what: str):
        if len(self.data) == 0:
            raise EmptyInputError(f"{self.source}: empty file")
        got = self.take(len(magic), "magic") if len(self.data) >= len(magic) else self.data
        if got != magic:
            raise MalformedHeaderError(f"{self.source}: not a {what} file (bad magic)")
        version = self.take(1, "version")[0]
        if version != FORMAT_VERSION:
            raise MalformedHeaderError(f"{self.source}: unsupported {what} version {version}")

    def finish(self):
        if self.pos != len(self.data):
            raise MalformedHeaderError(f"{self.source}: {len(self.data) - self.pos} trailing bytes")


# -- matrices ---------------------------------------------------------------

def _is_binary(path) -> bool:
    return Path(path).suffix.lower() in BINARY_SUFFIXES


def save_matrix(path, m, fmt: Optional[str] = None) -> None:
    """Save a column-convention matrix; ``fmt`` is ``"csv"`` or ``"bin"`` (default: by suffix)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise DataError(f"can only save non-empty 2-D matrices, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("refusing to save a matrix with NaN or Inf entries")
    fmt = fmt or ("bin" if _is_binary(path) else "csv")
    if fmt == "bin":
        with atomic_write(path, "wb") as fh:
            fh.write(MATRIX_MAGIC + bytes([FORMAT_VERSION]) + _pack_matrix(m))
    elif fmt == "csv":
        with atomic_write(path, newline="") as fh:
            w = csv.writer(fh)
            for sample in m.T:
                w.writerow([repr(float(v)) for v in sample])
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def _load_csv_matrix(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            values = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"{path}: row {lineno}, column {col}: not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise NonFiniteError(f"{path}: row {lineno}, column {col}: non-finite value {cell!r}")
                values.append(v)
            if rows and len(values) != len(rows[0]):
                raise ParseError(f"{path}: row {lineno} has {len(values)} columns, expected {len(rows[0])}")
            rows.append(values)
    if not rows:
        raise EmptyInputError(f"{path}: empty input")
    return np.array(rows, dtype=np.float64).T.copy()


def load_matrix(path, fmt: Optional[str] = None) -> np.ndarray:
    """Load a matrix with samples as columns. Binary files are detected by magic."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        head = fh.read(len(MATRIX_MAGIC))
    if fmt is None:
        fmt = "bin" if head == MATRIX_MAGIC or _is_binary(path) else "csv"
    if fmt == "csv":
        return _load_csv_matrix(path)
    if fmt != "bin":
        raise ValueError(f"unknown matrix format {fmt!r}")
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    r.header(MATRIX_MAGIC, "matrix")
    m = r.matrix()
    r.finish()
    return m


# -- models -----------------------------------------------------------------

def model_to_bytes(model: DeepTransformer) -> bytes:
    parts = [MODEL_MAGIC, bytes([FORMAT_VERSION, KINDS.index(model.kind)]), _U64.pack(model.depth)]
    for l1, l2 in zip(model.layers1, model.layers2):
        for layer in (l1, l2):
            p = layer.params
            parts.append(_F64.pack(p.lam) + _F64.pack(p.epsilon) + _F64.pack(p.mu))
            parts.append(_U64.pack(layer.budget.tau or 0))
            parts.append(_pack_matrix(layer.t))
    parts.append(_pack_matrix(model.map_12))
    if model.map_21 is not None:
        parts.append(_pack_matrix(model.map_21))
    return b"".join(parts)


def model_from_bytes(data: bytes, source: str = "<bytes>") -> DeepTransformer:
    r = _Reader(data, source)
    r.header(MODEL_MAGIC, "model")
    kind_byte = r.take(1, "kind")[0]
    if kind_byte >= len(KINDS):
        raise MalformedHeaderError(f"{source}: unknown model kind {kind_byte}")
    kind = KINDS[kind_byte]
    depth = r.u64("depth")
    if depth == 0 or depth > 1 << 16:
        raise DimensionOverflowError(f"{source}: implausible depth {depth}")
    layers = ([], [])
    for j in range(depth):
        for dom in (0, 1):
            what = f"layer {j + 1} domain {dom + 1}"
            lam, eps, mu = r.f64(what), r.f64(what), r.f64(what)
            tau = r.u64(what)
            try:
                params = RegularizationParams(lam, eps, mu)
                budget = SparsityBudget(tau or None)
            except ValueError as exc:
                raise MalformedHeaderError(f"{source}: {what}: {exc}") from exc
            t = r.matrix(f"{what} transform")
            if t.shape[0] != t.shape[1]:
                raise MalformedHeaderError(f"{source}: {what} transform is not square")
            layers[dom].append(TransformLayer(t, params, budget))
    map_12 = r.matrix("map 1->2")
    map_21 = r.matrix("map 2->1") if kind == "symmetric" else None
    r.finish()
    dims = {layer.dim for layer in layers[0] + layers[1]}
    dims |= {m.shape[0] for m in (map_12, map_21) if m is not None}
    dims |= {m.shape[1] for m in (map_12, map_21) if m is not None}
    if len(dims) != 1:
        raise MalformedHeaderError(f"{source}: transforms and maps disagree on dimension: {sorted(dims)}")
    return DeepTransformer(kind, layers[0], layers[1], map_12, map_21)


def save_model(path, model: DeepTransformer) -> None:
    with atomic_write(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path) -> DeepTransformer:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read(), os.fspath(path))


# -- labels -----------------------------------------------------------------

def load_labels(path) -> list:
    with open(path) as fh:
        labels = [line.strip() for line in fh if line.strip()]
    if not labels:
        raise EmptyInputError(f"{path}: no labels")
    return labels


def save_labels(path, labels) -> None:
    with atomic_write(path) as fh:
        for lab in labels:
            lab = str(lab)
            if not lab or "\n" in lab or lab != lab.strip():
                raise DataError(f"invalid label {lab!r}: must be non-empty, one line, no surrounding space")
            fh.write(lab + "\n")


# -- manifests --------------------------------------------------------------

SPLITS = ("train", "gallery", "probe")


@dataclass(frozen=True)
class DatasetManifest:
    """Files for one split. Paths are resolved relative to the manifest."""

    split: str
    labels: Path
    domain1: Optional[Path] = None
    domain2: Optional[Path] = None

    def matrix_path(self, domain: int) -> Path:
        path = self.domain1 if domain == 1 else self.domain2
        if path is None:
            raise ManifestError(f"{self.split} manifest has no domain{domain} entry")
        return path

    def load(self, domain: int):
        """Load ``(matrix, labels)`` for one domain, checking sample counts."""
        x = load_matrix(self.matrix_path(domain))
        labels = load_labels(self.labels)
        if x.shape[1] != len(labels):
            raise ManifestError(
                f"{self.split}: domain{domain} has {x.shape[1]} samples but {len(labels)} labels"
            )
        return x, labels


def _parse_kv(path, kind: str, error=ManifestError) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise error(f"{path}:{lineno}: expected 'key = value' in {kind}")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    return out


def _count_columns(path: Path) -> int:
    return load_matrix(path).shape[1]


def load_manifest(path, validate: bool = True) -> DatasetManifest:
    """Parse a manifest (``split``, ``labels``, ``domain1``, ``domain2`` keys).

    With ``validate`` every referenced file must exist and hold as many
    samples as there are labels.
    """
    path = Path(path)
    kv = _parse_kv(path, "manifest")
    unknown = set(kv) - {"split", "labels", "domain1", "domain2"}
    if unknown:
        raise ManifestError(f"{path}: unknown keys {sorted(unknown)}")
    split = kv.get("split", "train")
    if split not in SPLITS:
        raise ManifestError(f"{path}: split must be one of {SPLITS}, got {split!r}")
    if "labels" not in kv:
        raise ManifestError(f"{path}: missing 'labels'")
    if "domain1" not in kv and "domain2" not in kv:
        raise ManifestError(f"{path}: needs domain1 and/or domain2")
    base = path.parent

    def resolve(key):
        return (base / kv[key]) if key in kv else None

    manifest = DatasetManifest(split, resolve("labels"), resolve("domain1"), resolve("domain2"))
    if validate:
        for p in (manifest.labels, manifest.domain1, manifest.domain2):
            if p is not None and not p.is_file():
                raise ManifestError(f"{path}: referenced file does not exist: {p}")
        n = len(load_labels(manifest.labels))
        for dom in (1, 2):
            p = manifest.domain1 if dom == 1 else manifest.domain2
            if p is not None and _count_columns(p) != n:
                raise ManifestError(f"{path}: domain{dom} sample count does not match {n} labels")
    return manifest


def save_manifest(path, manifest: DatasetManifest) -> None:
    base = Path(path).resolve().parent

    def rel(p):
        return os.path.relpath(Path(p).resolve(), base)

    lines = [f"split = {manifest.split}", f"labels = {rel(manifest.labels)}"]
    if manifest.domain1 is not None:
        lines.append(f"domain1 = {rel(manifest.domain1)}")
    if manifest.domain2 is not None:
        lines.append(f"domain2 = {rel(manifest.domain2)}")
    with atomic_write(path) as fh:
        fh.write("\n".join(lines) + "\n")


# -- training config --------------------------------------------------------

_LAYER_KEYS = ("lambda", "epsilon", "mu", "tau", "iters", "tol")


@dataclass(frozen=True)
class TrainConfig:
    kind: str = "semi"
    depth: int = 2
    layers: tuple = ()
    seed: int = 0
    ridge: str = "auto"

    def schedule(self) -> LayerSchedule:
        return LayerSchedule(self.layers, self.ridge)


def _layer_from(section, path, name) -> LayerConfig:
    try:
        tau = section.get("tau", "none").strip().lower()
        return LayerConfig(
            RegularizationParams(
                float(section.get("lambda", 0.01)),
                float(section.get("epsilon", 1.0)),
                float(section.get("mu", 1.0)),
            ),
            SparsityBudget(None if tau in ("", "none") else int(tau)),
            int(section.get("iters", DEFAULT_ITERS)),
            float(section.get("tol", DEFAULT_TOL)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: [{name}]: {exc}") from exc


def parse_config(text: str, source: str = "<config>") -> TrainConfig:
    """Parse an INI-style config: ``[model]``, ``[layer]`` defaults, ``[layer.N]`` overrides."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    model = cp["model"] if cp.has_section("model") else {}
    try:
        kind = model.get("kind", "semi")
        depth = int(model.get("depth", 2))
        seed = int(model.get("seed", 0))
        ridge = model.get("ridge", "auto")
    except ValueError as exc:
        raise ConfigError(f"{source}: [model]: {exc}") from exc
    if kind not in KINDS:
        raise ConfigError(f"{source}: kind must be one of {KINDS}")
    if depth < 1:
        raise ConfigError(f"{source}: depth must be >= 1")
    if not 0 <= seed < 1 << 64:
        raise ConfigError(f"{source}: seed must be a 64-bit unsigned integer")
    if ridge not in ("off", "auto"):
        raise ConfigError(f"{source}: ridge must be 'off' or 'auto'")
    for name in cp.sections():
        if name == "model" or name == "layer":
            continue
        if not name.startswith("layer.") or not name[6:].isdigit() or not 1 <= int(name[6:]) <= depth:
            raise ConfigError(f"{source}: unexpected section [{name}]")
        bad = set(cp[name]) - set(_LAYER_KEYS)
        if bad:
            raise ConfigError(f"{source}: [{name}] unknown keys {sorted(bad)}")
    defaults = dict(cp["layer"]) if cp.has_section("layer") else {}
    layers = []
    for j in range(1, depth + 1):
        merged = dict(defaults)
        if cp.has_section(f"layer.{j}"):
            merged.update(cp[f"layer.{j}"])
        cfg = _layer_from(merged, source, f"layer.{j}")
        if cfg.iters < 1 or cfg.tol < 0:
            raise ConfigError(f"{source}: [layer.{j}] needs iters >= 1 and tol >= 0")
        layers.append(cfg)
    return TrainConfig(kind, depth, tuple(layers), seed, ridge)


def load_config(path) -> TrainConfig:
    with open(path) as fh:
        return parse_config(fh.read(), os.fspath(path))


def default_config_text() -> str:
    return (
        "[model]\n"
        "kind = semi\n"
        "depth = 2\n"
        "seed = 0\n"
        "ridge = auto\n"
        "\n"
        "[layer]\n"
        "lambda = 0.01\n"
        "epsilon = 1.0\n"
        "mu = 1.0\n"
        "tau = none\n"
        f"iters = {DEFAULT_ITERS}\n"
        f"tol = {DEFAULT_TOL!r}\n"
    )
