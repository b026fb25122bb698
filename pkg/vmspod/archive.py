"""
On-disk artifacts: binary array archives and JSON manifests.

Array layout (all integers little-endian):

    8 bytes   magic b'VMSPOD\\x00\\x01'
    u32       format version
    u64       rows
    u64       cols
    rows*cols float64, row-major
    u64       BLAKE2b-64 checksum of everything above
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .dns import SnapshotSet
from .errors import ArchiveError, CorruptArchiveError, MismatchedMeshError
from .pod import InnerProduct, PodBasis, ProjectedOperators
from .rom import ModelKind, RomTrajectory
from .utils import atomic_write_bytes, atomic_write_text, checksum, format_bytes


logger = logging.getLogger('vmspod.archive')

MAGIC = b'VMSPOD\x00\x01'
FORMAT_VERSION = 1

_HEADER = struct.Struct('<8sIQQ')
_FOOTER = struct.Struct('<Q')

MANIFEST_NAME = 'manifest.json'


def encode_array(array: np.ndarray) -> bytes:
    """
    Serialise a 1-D or 2-D float array. Vectors are stored as a single column.
    """
    data = np.asarray(array, dtype='<f8')
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    if data.ndim != 2:
        raise ArchiveError(f"only vectors and matrices can be archived, got shape {data.shape}")
    rows, cols = data.shape
    body = _HEADER.pack(MAGIC, FORMAT_VERSION, rows, cols) + np.ascontiguousarray(data).tobytes(order='C')
    return body + _FOOTER.pack(checksum(body))


def decode_array(payload: bytes, source: str = '<bytes>') -> np.ndarray:
    """
    Parse an archive produced by encode_array.

    Raises:
        CorruptArchiveError: bad magic, unsupported version, wrong size or checksum
    """
    if len(payload) < _HEADER.size + _FOOTER.size:
        raise CorruptArchiveError(f"{source}: truncated archive ({len(payload)} bytes)")
    magic, version, rows, cols = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise CorruptArchiveError(f"{source}: not a vmspod archive (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CorruptArchiveError(f"{source}: unsupported format version {version}")
    expected = _HEADER.size + 8 * rows * cols + _FOOTER.size
    if len(payload) != expected:
        raise CorruptArchiveError(
            f"{source}: {len(payload)} bytes on disk, header promises {expected}"
        )
    body = payload[:-_FOOTER.size]
    (stored,) = _FOOTER.unpack_from(payload, len(body))
    if stored != checksum(body):
        raise CorruptArchiveError(f"{source}: checksum mismatch")
    data = np.frombuffer(body, dtype='<f8', offset=_HEADER.size, count=rows * cols)
    return data.reshape(rows, cols).astype(np.float64)


def write_array(path: Path, array: np.ndarray) -> Path:
    """Atomically write one array archive."""
    payload = encode_array(array)
    atomic_write_bytes(path, payload)
    logger.debug(f"Wrote {path} ({format_bytes(len(payload))})")
    return Path(path)


def read_array(path: Path) -> np.ndarray:
    """Read a matrix archive (vectors come back as one column)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Archive not found: {path}")
    return decode_array(path.read_bytes(), source=str(path))


def read_vector(path: Path) -> np.ndarray:
    matrix = read_array(path)
    if matrix.shape[1] != 1:
        raise CorruptArchiveError(f"{path}: expected a vector, found shape {matrix.shape}")
    return matrix[:, 0]


def write_manifest(directory: Path, manifest: Dict[str, Any]) -> Path:
    path = Path(directory) / MANIFEST_NAME
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + '\n')
    return path


def read_manifest(directory: Path, kind: str, hint: str) -> Dict[str, Any]:
    """
    Load and sanity-check a manifest.

    Args:
        directory: artifact directory
        kind: expected artifact kind ('snapshots', 'basis')
        hint: command that produces the artifact, for the error message
    """
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"No {kind} found in {directory}. Run '{hint}' command first.")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise CorruptArchiveError(f"{path}: invalid manifest: {e}")
    if manifest.get('kind') != kind:
        raise CorruptArchiveError(f"{path}: expected a {kind} manifest, found {manifest.get('kind')!r}")
    if manifest.get('format_version') != FORMAT_VERSION:
        raise CorruptArchiveError(f"{path}: unsupported format version {manifest.get('format_version')}")
    return manifest


def check_space(manifest: Dict[str, Any], space_tag: Optional[str], source: Path) -> None:
    """Reject artifacts built on another mesh or element degree."""
    if space_tag is not None and manifest.get('space_tag') != space_tag:
        raise MismatchedMeshError(
            f"{source} was produced on {manifest.get('space_tag')}, the configuration asks for {space_tag}"
        )


def save_snapshots(directory: Path, snapshots: SnapshotSet, run: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write states, stored loads and load norms plus a manifest.

    Args:
        directory: snapshots/ directory of the run
        snapshots: DNS output
        run: extra manifest entries (mesh, degree, time grid)
    """
    directory = Path(directory)
    write_array(directory / 'states.bin', snapshots.states)
    write_array(directory / 'loads.bin', snapshots.loads)
    write_array(directory / 'load_norms.bin', snapshots.load_norms)
    manifest = {
        'kind': 'snapshots',
        'format_version': FORMAT_VERSION,
        'space_tag': snapshots.space_tag,
        'dt': snapshots.dt,
        'num_steps': snapshots.num_steps,
        'num_free': int(snapshots.states.shape[0]),
    }
    manifest.update(run or {})
    write_manifest(directory, manifest)
    logger.info(f"Saved {snapshots.num_steps + 1} snapshots to {directory}")
    return directory


def load_snapshots(directory: Path, space_tag: Optional[str] = None) -> SnapshotSet:
    """Read a snapshot set, checking it against the expected FE space."""
    directory = Path(directory)
    manifest = read_manifest(directory, 'snapshots', 'dns')
    check_space(manifest, space_tag, directory)

    states = read_array(directory / 'states.bin')
    loads = read_array(directory / 'loads.bin')
    load_norms = read_vector(directory / 'load_norms.bin')
    if states.shape != loads.shape or load_norms.shape[0] != states.shape[1]:
        raise CorruptArchiveError(
            f"{directory}: states {states.shape}, loads {loads.shape} and "
            f"{load_norms.shape[0]} load norms do not agree"
        )
    if states.shape[1] != manifest['num_steps'] + 1 or states.shape[0] != manifest['num_free']:
        raise CorruptArchiveError(f"{directory}: array shapes disagree with the manifest")

    return SnapshotSet(
        states=states,
        dt=float(manifest['dt']),
        space_tag=manifest['space_tag'],
        loads=loads,
        load_norms=load_norms,
    )


def save_basis(
    directory: Path,
    basis: PodBasis,
    projected: ProjectedOperators,
    space_tag: str,
    run: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write modes, eigenvalues and the d×d projected operators plus a manifest."""
    directory = Path(directory)
    write_array(directory / 'modes.bin', basis.modes)
    write_array(directory / 'eigenvalues.bin', basis.eigenvalues)
    write_array(directory / 'mass.bin', projected.mass)
    write_array(directory / 'stiffness.bin', projected.stiffness)
    write_array(directory / 'convection.bin', projected.convection)
    manifest = {
        'kind': 'basis',
        'format_version': FORMAT_VERSION,
        'space_tag': space_tag,
        'inner_product': basis.inner_product.value,
        'rank': basis.rank,
        'snapshot_count': basis.snapshot_count,
        'discarded_energy': basis.discarded_energy,
        'quotients': basis.quotients,
    }
    manifest.update(run or {})
    write_manifest(directory, manifest)
    logger.info(f"Saved POD basis of rank {basis.rank} to {directory}")
    return directory


def load_basis(directory: Path, space_tag: Optional[str] = None) -> Tuple[PodBasis, ProjectedOperators]:
    """
    Read a basis archive.

    Raises:
        CorruptArchiveError: eigenvalues not positive and descending, or shapes inconsistent
        MismatchedMeshError: basis built on another FE space
    """
    directory = Path(directory)
    manifest = read_manifest(directory, 'basis', 'pod')
    check_space(manifest, space_tag, directory)

    modes = read_array(directory / 'modes.bin')
    eigenvalues = read_vector(directory / 'eigenvalues.bin')
    if eigenvalues.size == 0 or np.any(eigenvalues <= 0) or np.any(np.diff(eigenvalues) > 0):
        raise CorruptArchiveError(f"{directory}: eigenvalues are not positive and descending")
    rank = eigenvalues.size
    if modes.shape[1] != rank or rank != manifest['rank']:
        raise CorruptArchiveError(f"{directory}: {modes.shape[1]} modes for {rank} eigenvalues")

    projected = ProjectedOperators(
        mass=read_array(directory / 'mass.bin'),
        stiffness=read_array(directory / 'stiffness.bin'),
        convection=read_array(directory / 'convection.bin'),
    )
    for name in ('mass', 'stiffness', 'convection'):
        if getattr(projected, name).shape != (rank, rank):
            raise CorruptArchiveError(f"{directory}: projected {name} is not {rank}×{rank}")

    basis = PodBasis(
        modes=modes,
        eigenvalues=eigenvalues,
        inner_product=InnerProduct.parse(manifest['inner_product']),
        snapshot_count=int(manifest['snapshot_count']),
        discarded_energy=float(manifest.get('discarded_energy', 0.0)),
        quotients=bool(manifest.get('quotients', True)),
    )
    return basis, projected


def trajectory_path(directory: Path, kind: ModelKind) -> Path:
    return Path(directory) / f"{kind.value}-trajectory.bin"


def save_trajectory(directory: Path, trajectory: RomTrajectory) -> Path:
    return write_array(trajectory_path(directory, trajectory.model_kind), trajectory.coeffs)


def load_trajectory(directory: Path, kind: ModelKind) -> RomTrajectory:
    path = trajectory_path(directory, kind)
    if not path.exists():
        raise FileNotFoundError(f"No {kind.value} trajectory in {directory}. Run 'rom' command first.")
    return RomTrajectory(coeffs=read_array(path), model_kind=kind)
