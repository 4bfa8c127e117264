"""Assay and feature ingestion, dataset splitting and synthetic fixtures."""

import json
import math
import struct
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import ValidationError

from .errors import ConfigError, DataError, FormatError
from .log import get_logger
from .models import Assay, AssayFileHeader, CliffPairSpec, LigandEntry
from .seeding import derive_rng
from .storage import ByteReader, atomic_write_bytes, atomic_write_text, read_bytes, seal, unseal

logger = get_logger(__name__)

Array = NDArray[np.float64]

FEATURE_MAGIC = b"HYPSF1"
FEATURE_VERSION = 1
FEATURE_DTYPE = "<f4"
ASSAY_FORMAT = "hypseek-assays"
ASSAY_VERSION = 1
MANIFEST_COLUMNS = (
    "pair_id",
    "assay_id",
    "weak_ligand",
    "strong_ligand",
    "feature_distance",
    "affinity_gap",
    "degenerate",
)


@dataclass(frozen=True, eq=False)
class FeatureStore:
    """Dense feature rows keyed by entity id."""

    ids: tuple[str, ...]
    values: Array
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != len(self.ids):
            raise DataError(f"feature block shape {values.shape} does not match {len(self.ids)} ids")
        if values.shape[1] == 0:
            raise DataError("feature dimension must be at least 1")
        if not np.all(np.isfinite(values)):
            raise DataError("feature values must be finite")
        index: dict[str, int] = {}
        for row, entity in enumerate(self.ids):
            if entity in index:
                raise DataError(f"duplicate feature id '{entity}'")
            index[entity] = row
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_mapping(cls, rows: dict[str, ArrayLike]) -> "FeatureStore":
        ids = tuple(rows)
        return cls(ids=ids, values=np.stack([np.asarray(rows[i], dtype=np.float64) for i in ids]))

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, entity: object) -> bool:
        return entity in self._index

    def row(self, entity: str) -> Array:
        try:
            return self.values[self._index[entity]]
        except KeyError:
            raise DataError(f"feature id '{entity}' not found") from None

    def rows(self, entities: Sequence[str]) -> Array:
        if len(entities) == 0:
            return np.zeros((0, self.dim))
        try:
            return self.values[[self._index[e] for e in entities]]
        except KeyError as e:
            raise DataError(f"feature id '{e.args[0]}' not found") from None

    def merged(self, other: "FeatureStore") -> "FeatureStore":
        if other.dim != self.dim:
            raise DataError(f"cannot merge feature dimensions {self.dim} and {other.dim}")
        return FeatureStore(self.ids + other.ids, np.vstack([self.values, other.values]))


# Features


def encode_features(store: FeatureStore) -> bytes:
    body = bytearray(struct.pack("<III", FEATURE_VERSION, len(store), store.dim))
    for entity in store.ids:
        raw = entity.encode("utf-8")
        body += struct.pack("<I", len(raw)) + raw
    body += store.values.astype(FEATURE_DTYPE).tobytes(order="C")
    return seal(FEATURE_MAGIC, bytes(body))


def decode_features(data: bytes, what: str = "feature file") -> FeatureStore:
    reader = ByteReader(unseal(data, FEATURE_MAGIC, what), what)
    version = reader.u32()
    if version != FEATURE_VERSION:
        raise FormatError(f"{what}: unsupported version {version}")
    rows, dim = reader.u32(), reader.u32()
    if dim == 0:
        raise FormatError(f"{what}: dimension 0")
    ids = []
    for _ in range(rows):
        try:
            ids.append(reader.take(reader.u32()).decode("utf-8"))
        except UnicodeDecodeError:
            raise FormatError(f"{what}: id is not valid UTF-8") from None
    values = reader.array(FEATURE_DTYPE, rows * dim).reshape(rows, dim)
    reader.finish()
    return FeatureStore(tuple(ids), values)


def write_features(path: Path, store: FeatureStore) -> None:
    atomic_write_bytes(path, encode_features(store))


def load_features(path: Path) -> FeatureStore:
    """Read a CRC-checked feature file; values are widened to float64."""
    store = decode_features(read_bytes(path, "feature file"), what=str(path))
    logger.debug("loaded %d features of dimension %d from %s", len(store), store.dim, path)
    return store


# Assays


def _orientation_check(assay: Assay) -> None:
    actives = [lg.affinity for lg in assay.ligands if lg.active and lg.affinity is not None]
    inactives = [
        lg.affinity for lg in assay.ligands if lg.active is False and lg.affinity is not None
    ]
    if actives and inactives and np.median(actives) < np.median(inactives):
        raise DataError(
            f"data-orientation: assay '{assay.assay_id}' has active median affinity "
            f"{np.median(actives):.4g} below inactive median {np.median(inactives):.4g}"
        )


def _flip_affinities(assay: Assay) -> Assay:
    ligands = [
        lg if lg.affinity is None else lg.model_copy(update={"affinity": -lg.affinity})
        for lg in assay.ligands
    ]
    return assay.model_copy(update={"ligands": ligands})


def parse_assays(lines: Iterable[str], source: str = "<assays>") -> list[Assay]:
    header: AssayFileHeader | None = None
    assays: list[Assay] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{source}:{lineno}: invalid JSON ({e.msg})") from None
        try:
            if header is None:
                header = AssayFileHeader.model_validate(record)
                continue
            assay = Assay.model_validate(record)
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(p) for p in first["loc"])
            detail = f"{where}: {first['msg']}" if where else first["msg"]
            raise DataError(f"{source}:{lineno}: {detail}") from None
        if assay.assay_id in seen:
            raise DataError(f"{source}:{lineno}: duplicate assay_id '{assay.assay_id}'")
        seen.add(assay.assay_id)
        if header.affinity_orientation == "lower_stronger":
            assay = _flip_affinities(assay)
        _orientation_check(assay)
        assays.append(assay)
    return assays


def load_assays(path: Path) -> list[Assay]:
    """Read a JSON-lines assay file; affinities come back larger = stronger."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"assay file not found: {path}") from None
    return parse_assays(text.splitlines(), source=str(path))


def render_assays(assays: Sequence[Assay]) -> str:
    header = {
        "format": ASSAY_FORMAT,
        "version": ASSAY_VERSION,
        "affinity_orientation": "higher_stronger",
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    lines.extend(json.dumps(a.model_dump(mode="json"), separators=(",", ":")) for a in assays)
    return "\n".join(lines) + "\n"


def write_assays(path: Path, assays: Sequence[Assay]) -> None:
    atomic_write_text(path, render_assays(assays))


def validate_references(assays: Sequence[Assay], store: FeatureStore) -> None:
    """Fail on the first feature id an assay references but the store lacks."""
    for assay in assays:
        wanted = [*assay.pocket_feature_ids]
        if assay.sequence_feature_id is not None:
            wanted.append(assay.sequence_feature_id)
        wanted.extend(lg.feature_id for lg in assay.ligands)
        for entity in wanted:
            if entity not in store:
                raise DataError(f"assay '{assay.assay_id}' references missing feature id '{entity}'")
        for pocket in assay.pocket_feature_ids[1:]:
            if store.row(pocket).shape != store.row(assay.pocket_feature_ids[0]).shape:
                raise DataError(f"assay '{assay.assay_id}' has pockets of different dimension")


# Splits


def split_counts(total: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder rounding of ``total`` by ``fractions``."""
    raw = np.asarray(fractions, dtype=np.float64) * total
    counts = np.floor(raw).astype(int)
    remainder = total - int(counts.sum())
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:remainder]] += 1
    return [int(c) for c in counts]


def split_assays(
    assays: Sequence[Assay], fractions: Sequence[float], seed: int
) -> tuple[list[Assay], list[Assay], list[Assay]]:
    """Target-disjoint train/validation/test split."""
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ConfigError("split fractions must be three non-negative numbers")
    if not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ConfigError(f"split fractions must sum to 1, got {sum(fractions)}")
    targets = sorted({a.target_id for a in assays})
    wanted = sum(1 for f in fractions if f > 0)
    if len(targets) < wanted:
        raise DataError(f"{len(targets)} target(s) cannot fill {wanted} splits")
    shuffled = [targets[i] for i in derive_rng(seed, "split").permutation(len(targets))]
    counts = split_counts(len(targets), fractions)
    split_of: dict[str, int] = {}
    start = 0
    for split, count in enumerate(counts):
        for target in shuffled[start : start + count]:
            split_of[target] = split
        start += count
    parts: tuple[list[Assay], list[Assay], list[Assay]] = ([], [], [])
    for assay in assays:
        parts[split_of[assay.target_id]].append(assay)
    return parts


# Synthetic fixtures


@dataclass(frozen=True)
class CliffPair:
    pair_id: str
    assay_id: str
    weak_ligand: str
    strong_ligand: str
    feature_distance: float
    affinity_gap: float
    degenerate: bool


def _top_half(affinities: Sequence[float]) -> list[bool]:
    count = max(1, len(affinities) // 2)
    order = np.argsort(-np.asarray(affinities, dtype=np.float64), kind="stable")
    active = np.zeros(len(affinities), dtype=bool)
    active[order[:count]] = True
    return [bool(a) for a in active]


def as_stored(values: ArrayLike) -> Array:
    """Round to the precision feature files keep."""
    return np.asarray(values, dtype=FEATURE_DTYPE).astype(np.float64)


def _synthetic_targets(
    targets: int, ligands_per_assay: int, dim: int, noise: float, scale: float, seed: int
) -> tuple[list[dict[str, Any]], dict[str, Array], list[Array]]:
    if min(targets, ligands_per_assay, dim) < 1:
        raise ConfigError("targets, ligands per assay and dim must all be at least 1")
    rng = derive_rng(seed, "synthetic")
    records: list[dict[str, Any]] = []
    rows: dict[str, Array] = {}
    prototypes: list[Array] = []
    for t in range(targets):
        prototype = rng.normal(size=dim)
        prototype *= scale / np.linalg.norm(prototype)
        prototypes.append(prototype)
        pocket_id, sequence_id = f"pocket-{t:03d}", f"sequence-{t:03d}"
        rows[pocket_id] = as_stored(prototype + noise * rng.normal(size=dim))
        rows[sequence_id] = as_stored(prototype + noise * rng.normal(size=dim))
        strengths = rng.uniform(0.0, 1.0, size=ligands_per_assay)
        ligand_rows = prototype[None, :] * (1.0 + strengths[:, None])
        ligand_rows = as_stored(ligand_rows + noise * rng.normal(size=(ligands_per_assay, dim)))
        ligands = []
        for j, strength in enumerate(strengths):
            ligand_id = f"lig-{t:03d}-{j:03d}"
            rows[ligand_id] = ligand_rows[j]
            ligands.append({"ligand_id": ligand_id, "affinity": float(strength)})
        records.append(
            {
                "assay_id": f"assay-{t:03d}",
                "target_id": f"target-{t:03d}",
                "pocket": pocket_id,
                "sequence": sequence_id,
                "ligands": ligands,
            }
        )
    return records, rows, prototypes


def _build_assays(records: list[dict[str, Any]]) -> list[Assay]:
    assays = []
    for record in records:
        ligands = record["ligands"]
        labels = _top_half([lg["affinity"] for lg in ligands])
        assays.append(
            Assay(
                assay_id=str(record["assay_id"]),
                target_id=str(record["target_id"]),
                pocket_feature_ids=[str(record["pocket"])],
                sequence_feature_id=str(record["sequence"]),
                ligands=[
                    LigandEntry(
                        ligand_id=lg["ligand_id"],
                        feature_id=lg["ligand_id"],
                        active=label,
                        affinity=lg["affinity"],
                    )
                    for lg, label in zip(ligands, labels)
                ],
            )
        )
    return assays


def generate_synthetic(
    targets: int, ligands_per_assay: int, dim: int, noise: float, seed: int
) -> tuple[list[Assay], FeatureStore]:
    """One assay per target; ligand features scale a target prototype by (1 + strength).

    The affinity of a ligand is its strength; the top half by strength is active.
    """
    if noise < 0:
        raise ConfigError("noise must be non-negative")
    records, rows, _ = _synthetic_targets(targets, ligands_per_assay, dim, noise, 1.0, seed)
    return _build_assays(records), FeatureStore.from_mapping(rows)


def generate_cliff_pairs(
    spec: CliffPairSpec, seed: int
) -> tuple[list[Assay], FeatureStore, list[CliffPair]]:
    """Synthetic assays with embedded pairs of near-identical ligands and distant affinities."""
    records, rows, prototypes = _synthetic_targets(
        spec.targets, spec.ligands_per_assay, spec.dim, spec.noise, spec.base_radius, seed
    )
    rng = derive_rng(seed, "cliffs")
    manifest = []
    for k in range(spec.pair_count):
        t = k % spec.targets
        record = records[t]
        strength = float(rng.uniform(0.0, 1.0))
        weak = as_stored(prototypes[t] * (1.0 + strength) + spec.noise * rng.normal(size=spec.dim))
        direction = rng.normal(size=spec.dim)
        direction /= np.linalg.norm(direction)
        strong = as_stored(weak + spec.feature_epsilon * direction)
        weak_id, strong_id = f"cliff-{k:03d}-weak", f"cliff-{k:03d}-strong"
        rows[weak_id], rows[strong_id] = weak, strong
        ligands = record["ligands"]
        ligands.append({"ligand_id": weak_id, "affinity": strength})
        ligands.append({"ligand_id": strong_id, "affinity": strength + spec.affinity_gap})
        manifest.append(
            CliffPair(
                pair_id=f"cliff-{k:03d}",
                assay_id=str(record["assay_id"]),
                weak_ligand=weak_id,
                strong_ligand=strong_id,
                feature_distance=float(np.linalg.norm(strong - weak)),
                affinity_gap=spec.affinity_gap,
                degenerate=spec.feature_epsilon == 0,
            )
        )
    return _build_assays(records), FeatureStore.from_mapping(rows), manifest


def render_cliff_manifest(pairs: Sequence[CliffPair]) -> str:
    lines = ["\t".join(MANIFEST_COLUMNS)]
    for p in pairs:
        lines.append(
            "\t".join(
                [
                    p.pair_id,
                    p.assay_id,
                    p.weak_ligand,
                    p.strong_ligand,
                    format(p.feature_distance, ".17g"),
                    format(p.affinity_gap, ".17g"),
                    "1" if p.degenerate else "0",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_cliff_manifest(path: Path, pairs: Sequence[CliffPair]) -> None:
    atomic_write_text(path, render_cliff_manifest(pairs))


def load_cliff_manifest(path: Path) -> list[CliffPair]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise DataError(f"pair manifest not found: {path}") from None
    if not lines or tuple(lines[0].split("\t")) != MANIFEST_COLUMNS:
        raise DataError(f"{path}: not a cliff pair manifest")
    pairs = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != len(MANIFEST_COLUMNS):
            raise DataError(f"{path}:{lineno}: expected {len(MANIFEST_COLUMNS)} columns")
        pairs.append(
            CliffPair(
                pair_id=fields[0],
                assay_id=fields[1],
                weak_ligand=fields[2],
                strong_ligand=fields[3],
                feature_distance=float(fields[4]),
                affinity_gap=float(fields[5]),
                degenerate=fields[6] == "1",
            )
        )
    return pairs
