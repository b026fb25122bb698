"""
Shared utility functions for vmspod.
"""

import csv
import hashlib
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union


def format_float(value: float) -> str:
    """
    Format a float with 17 significant digits, enough to re-parse it exactly.

    Args:
        value: Number to format

    Returns:
        Decimal string ('nan', 'inf' and '-inf' for non-finite values)
    """
    value = float(value)
    if math.isnan(value):
        return 'nan'
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return f"{value:.17g}"


def format_cell(value: Any) -> str:
    """CSV cell text: floats at full precision, None as empty, the rest as str."""
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return format_float(value)
    if hasattr(value, 'dtype') and getattr(value.dtype, 'kind', '') == 'f':
        return format_float(value)
    return str(value)


def parse_float_list(text: str) -> List[float]:
    """Parse '1e-2, 1e-4' into [0.01, 0.0001]; empty text gives []."""
    return [float(item) for item in text.split(',') if item.strip()]


def parse_int_list(text: str) -> List[int]:
    """Parse '5, 10, 20' into [5, 10, 20]; empty text gives []."""
    return [int(item) for item in text.split(',') if item.strip()]


def checksum(payload: bytes) -> int:
    """64-bit BLAKE2b digest of a byte string, as an unsigned integer."""
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), 'little')


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    """
    Write bytes to a temporary file in the target directory, then rename it
    over the target.

    Args:
        path: Destination file
        payload: Content
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix='.tmp', dir=path.parent)
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(payload)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        raise


def atomic_write_text(path: Path, text: str) -> None:
    """Text flavour of atomic_write_bytes (UTF-8, newlines untouched)."""
    atomic_write_bytes(path, text.encode('utf-8'))


def render_csv(fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    """Render rows as CSV text with a header line."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(fieldnames), lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow({name: format_cell(row.get(name)) for name in fieldnames})
    return buffer.getvalue()


def write_csv(path: Path, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    """
    Atomically write a CSV table.

    Args:
        path: Destination file
        fieldnames: Column names, in order
        rows: Dicts keyed by column name

    Returns:
        The path written
    """
    atomic_write_text(path, render_csv(fieldnames, rows))
    return Path(path)


def read_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    """Read a CSV table written by write_csv."""
    with open(path, 'r', newline='') as f:
        return list(csv.DictReader(f))


def format_bytes(size: int) -> str:
    """
    Format byte size as human-readable string.

    Args:
        size: Size in bytes

    Returns:
        Formatted string (e.g., "1.5 MB")
    """
    for unit in ['B', 'KB', 'MB', 'GB']:
        if size < 1024.0:
            return f"{size:.1f} {unit}"
        size /= 1024.0
    return f"{size:.1f} TB"


def format_seconds(seconds: float) -> str:
    """Wall-clock duration as '12.3s', '4m 05s' or '2h 03m'."""
    if seconds < 60:
        return f"{seconds:.1f}s"
    minutes, secs = divmod(int(round(seconds)), 60)
    if minutes < 60:
        return f"{minutes}m {secs:02d}s"
    hours, minutes = divmod(minutes, 60)
    return f"{hours}h {minutes:02d}m"
