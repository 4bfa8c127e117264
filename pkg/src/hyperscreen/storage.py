"""On-disk artifacts: sealed binary containers and the run directory layout."""

import hashlib
import os
import struct
import tempfile
import zlib
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .config import (
    checkpoint_path,
    cliff_report_path,
    evaluation_report_path,
    loss_log_path,
    ranked_dir,
    ranking_report_path,
    train_state_path,
)
from .errors import DataError, FormatError
from .log import get_logger
from .models import LOSS_TERMS

logger = get_logger(__name__)

CRC_SIZE = 4
LOSS_LOG_COLUMNS = ("epoch", "batch", "total", *LOSS_TERMS)


def seal(magic: bytes, body: bytes) -> bytes:
    """Prefix the magic and append a CRC-32 of everything before the trailer."""
    payload = magic + body
    return payload + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)


def unseal(data: bytes, magic: bytes, what: str) -> bytes:
    """Verify magic and CRC-32 and return the body between them."""
    if len(data) < len(magic) + CRC_SIZE or not data.startswith(magic):
        raise FormatError(f"{what}: bad magic (expected {magic.decode('ascii')})")
    payload, trailer = data[:-CRC_SIZE], data[-CRC_SIZE:]
    (expected,) = struct.unpack("<I", trailer)
    if zlib.crc32(payload) & 0xFFFFFFFF != expected:
        raise FormatError(f"{what}: CRC mismatch (truncated or corrupted)")
    return payload[len(magic) :]


class ByteReader:
    """Sequential little-endian reader that reports truncation as a format error."""

    def __init__(self, data: bytes, what: str) -> None:
        self.data = data
        self.what = what
        self.offset = 0

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if size < 0 or end > len(self.data):
            raise FormatError(f"{self.what}: unexpected end of data")
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def u32(self) -> int:
        value: int = struct.unpack("<I", self.take(4))[0]
        return value

    def f64(self) -> float:
        value: float = struct.unpack("<d", self.take(8))[0]
        return value

    def array(self, dtype: str, count: int) -> NDArray[np.float64]:
        itemsize = np.dtype(dtype).itemsize
        raw = np.frombuffer(self.take(itemsize * count), dtype=dtype)
        return raw.astype(np.float64)

    def finish(self) -> None:
        if self.offset != len(self.data):
            raise FormatError(f"{self.what}: {len(self.data) - self.offset} trailing bytes")


def read_bytes(path: Path, what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise DataError(f"{what} not found: {path}") from None
    except OSError as e:
        raise DataError(f"cannot read {what} {path}: {e}") from e


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def file_digest(path: Path, length: int = 16) -> str:
    """Hex prefix of the SHA-256 of a file."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:length]


def format_score(value: float) -> str:
    return f"{value:.9g}"


def format_exact(value: float) -> str:
    return format(float(value), ".17g")


def format_table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    lines = ["\t".join(header)]
    lines.extend("\t".join(row) for row in rows)
    return "\n".join(lines) + "\n"


class RunDirectory:
    """Owns the file layout of one output directory."""

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        self.checkpoint_path = checkpoint_path(self.root)
        self.loss_log_path = loss_log_path(self.root)
        self.train_state_path = train_state_path(self.root)
        self.ranked_dir = ranked_dir(self.root)
        self.evaluation_path = evaluation_report_path(self.root)
        self.ranking_path = ranking_report_path(self.root)
        self.cliff_path = cliff_report_path(self.root)

    def ensure(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)

    # Loss log
    def append_loss_rows(self, rows: Sequence[tuple[int, int, float, dict[str, float]]]) -> None:
        """Append (epoch, batch, total, breakdown) rows; the header is written once."""
        self.ensure()
        new_file = not self.loss_log_path.exists()
        with open(self.loss_log_path, "a", encoding="utf-8", newline="\n") as f:
            if new_file:
                f.write("\t".join(LOSS_LOG_COLUMNS) + "\n")
            for epoch, batch, total, breakdown in rows:
                values = [str(epoch), str(batch), format_exact(total)]
                values.extend(format_exact(breakdown.get(t, 0.0)) for t in LOSS_TERMS)
                f.write("\t".join(values) + "\n")

    def truncate_loss_log(self, last_epoch: int) -> None:
        """Drop rows logged after ``last_epoch`` (left by an interrupted run)."""
        if not self.loss_log_path.exists():
            return
        lines = self.loss_log_path.read_text(encoding="utf-8").splitlines()
        kept = lines[:1] + [ln for ln in lines[1:] if ln and int(ln.split("\t", 1)[0]) <= last_epoch]
        atomic_write_text(self.loss_log_path, "\n".join(kept) + "\n")

    def read_loss_log(self) -> list[dict[str, float]]:
        if not self.loss_log_path.exists():
            return []
        lines = self.loss_log_path.read_text(encoding="utf-8").splitlines()
        header = lines[0].split("\t")
        return [dict(zip(header, map(float, line.split("\t")))) for line in lines[1:] if line]

    # Ranked outputs
    def ranked_path(self, query_id: str) -> Path:
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in query_id)
        return self.ranked_dir / f"{safe}.tsv"

    def write_ranked(
        self, query_id: str, ranked: Sequence[tuple[str, float]], checkpoint_hash: str
    ) -> Path:
        path = self.ranked_path(query_id)
        rows = (
            (str(rank), ligand_id, format_score(score))
            for rank, (ligand_id, score) in enumerate(ranked, start=1)
        )
        text = f"# query={query_id} checkpoint={checkpoint_hash}\n"
        text += format_table(("rank", "ligand_id", "score"), rows)
        atomic_write_text(path, text)
        return path

    def read_ranked(self, query_id: str) -> list[tuple[str, float]]:
        lines = self.ranked_path(query_id).read_text(encoding="utf-8").splitlines()
        out = []
        for line in lines[2:]:
            _, ligand_id, score = line.split("\t")
            out.append((ligand_id, float(score)))
        return out

    # Reports
    def write_report(self, path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
        atomic_write_text(path, format_table(header, rows))
        logger.info("wrote %s", path)
        return path
