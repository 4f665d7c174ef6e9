"""
Codecs for the "xyzl" text format and the "pcb" packed binary format.

xyzl: header "N C", then N lines "x y z", then an optional "label k" line.
pcb:  b"PCB1", little-endian uint32 N, then 3N little-endian float32 values.
"""

import struct
import threading
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from ..errors import InvalidCloudError, PointFileError
from ..geometry import PointCloud
from .base import ArtifactRepository

PCB_MAGIC = b'PCB1'
POINT_SUFFIXES = ('.xyzl', '.pcb')

PathLike = Union[str, Path]


def format_xyzl(cloud: PointCloud, num_classes: int = 0) -> str:
    lines = [f"{cloud.num_points} {num_classes}"]
    lines.extend(f"{x!r} {y!r} {z!r}" for x, y, z in cloud.points.tolist())
    if cloud.label is not None:
        lines.append(f"label {cloud.label}")
    return '\n'.join(lines) + '\n'


def parse_xyzl(text: str, source: str = '<xyzl>') -> Tuple[PointCloud, int]:
    """Parse xyzl text into a cloud and the declared class count."""
    lines = text.splitlines()
    if not lines:
        raise PointFileError(f"{source}:1: missing header")
    header = lines[0].split()
    if len(header) != 2:
        raise PointFileError(f"{source}:1: header must be 'N C'")
    try:
        count, num_classes = int(header[0]), int(header[1])
    except ValueError:
        raise PointFileError(f"{source}:1: non-integer header {lines[0]!r}")
    if count < 1:
        raise PointFileError(f"{source}:1: point count must be positive")

    points = []
    label = None
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split()
        if not fields:
            continue
        if fields[0] == 'label':
            if len(points) != count or len(fields) != 2:
                raise PointFileError(f"{source}:{lineno}: misplaced label line")
            try:
                label = int(fields[1])
            except ValueError:
                raise PointFileError(f"{source}:{lineno}: non-integer label {fields[1]!r}")
            continue
        if label is not None or len(points) == count:
            raise PointFileError(f"{source}:{lineno}: more than {count} points")
        if len(fields) != 3:
            raise PointFileError(f"{source}:{lineno}: expected 3 coordinates, got {len(fields)}")
        try:
            points.append([float(v) for v in fields])
        except ValueError:
            raise PointFileError(f"{source}:{lineno}: non-numeric coordinate in {line.strip()!r}")

    if len(points) != count:
        raise PointFileError(f"{source}: header declares {count} points, found {len(points)}")
    try:
        cloud = PointCloud(np.array(points), label=label, id=Path(source).stem)
    except InvalidCloudError as e:
        raise PointFileError(f"{source}: {e}")
    return cloud, num_classes


def encode_pcb(cloud: PointCloud) -> bytes:
    payload = cloud.points.astype('<f4').tobytes()
    return PCB_MAGIC + struct.pack('<I', cloud.num_points) + payload


def decode_pcb(data: bytes, source: str = '<pcb>') -> PointCloud:
    if data[:4] != PCB_MAGIC:
        raise PointFileError(f"{source}@0: bad magic {data[:4]!r}")
    if len(data) < 8:
        raise PointFileError(f"{source}@4: truncated point count")
    (count,) = struct.unpack('<I', data[4:8])
    expected = 8 + 12 * count
    if len(data) != expected:
        raise PointFileError(f"{source}@{min(len(data), expected)}: expected {expected} bytes, found {len(data)}")
    points = np.frombuffer(data, dtype='<f4', offset=8).reshape(count, 3).astype(np.float64)
    try:
        return PointCloud(points, id=Path(source).stem)
    except InvalidCloudError as e:
        raise PointFileError(f"{source}@8: {e}")


def read_point_file(path: PathLike) -> Tuple[PointCloud, Optional[int]]:
    """Read either format; the class count is None for pcb files."""
    path = Path(path)
    if path.suffix == '.xyzl':
        return parse_xyzl(path.read_text(encoding='utf-8'), source=str(path))
    if path.suffix == '.pcb':
        return decode_pcb(path.read_bytes(), source=str(path)), None
    raise PointFileError(f"{path}: unsupported point file suffix {path.suffix!r}")


def write_point_file(path: PathLike, cloud: PointCloud, num_classes: int = 0) -> Path:
    path = Path(path)
    if path.suffix == '.xyzl':
        path.write_text(format_xyzl(cloud, num_classes), encoding='utf-8')
    elif path.suffix == '.pcb':
        path.write_bytes(encode_pcb(cloud))
    else:
        raise PointFileError(f"{path}: unsupported point file suffix {path.suffix!r}")
    return path


class PointFileRepository(ArtifactRepository):
    """Directory of point files keyed by sample id."""

    def __init__(self, data_dir: PathLike, suffix: str = '.pcb'):
        if suffix not in POINT_SUFFIXES:
            raise PointFileError(f"unsupported point file suffix {suffix!r}")
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.suffix = suffix
        self._lock = threading.Lock()

    def path_for(self, name: str) -> Path:
        return self.data_dir / f"{name}{self.suffix}"

    def save(self, cloud: PointCloud, name: Optional[str] = None, num_classes: int = 0, **kwargs) -> Path:
        """Write a cloud; the name defaults to the cloud id."""
        name = name or cloud.id
        if not name:
            raise PointFileError("cloud has no id and no name was given")
        with self._lock:
            return write_point_file(self.path_for(name), cloud, num_classes)

    def find_by_name(self, name: str) -> Optional[PointCloud]:
        path = self.path_for(name)
        if not path.exists():
            return None
        return read_point_file(path)[0]

    def find_all(self) -> List[str]:
        return [p.stem for p in list_point_files(self.data_dir) if p.suffix == self.suffix]

    def delete(self, name: str) -> bool:
        path = self.path_for(name)
        if path.exists():
            path.unlink()
            return True
        return False


def list_point_files(directory: PathLike) -> List[Path]:
    directory = Path(directory)
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix in POINT_SUFFIXES)
