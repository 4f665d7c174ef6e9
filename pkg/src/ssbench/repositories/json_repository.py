import json
import threading
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .. import __version__
from ..formats import MANIFEST_FORMAT, REPORT_FORMAT, check_format
from .base import ArtifactRepository


class JSONEncoder(json.JSONEncoder):
    """JSON encoder for datetimes and numpy scalars/arrays."""
    def default(self, obj):
        if isinstance(obj, (datetime, date)):
            return obj.isoformat()
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, Path):
            return str(obj)
        return super().default(obj)


class JSONRepositoryBase(ArtifactRepository):
    """Directory of JSON documents, one file per artifact name."""

    def __init__(self, data_dir, suffix: str = '.json'):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.suffix = suffix
        self._lock = threading.Lock()

    def path_for(self, name: str) -> Path:
        return self.data_dir / f"{name}{self.suffix}"

    def _read_data(self, path: Path) -> Dict[str, Any]:
        """Read one JSON document."""
        with self._lock:
            with open(path, 'r') as f:
                return json.load(f)

    def _write_data(self, path: Path, data: Dict[str, Any]):
        """Write one JSON document."""
        with self._lock:
            with open(path, 'w') as f:
                json.dump(data, f, indent=2, cls=JSONEncoder)

    def find_all(self) -> List[str]:
        """Names of all stored documents."""
        return sorted(p.name[:-len(self.suffix)] for p in self.data_dir.glob(f"*{self.suffix}"))

    def find_by_name(self, name: str) -> Optional[Dict[str, Any]]:
        """Load a document by name."""
        path = self.path_for(name)
        if not path.exists():
            return None
        return self._read_data(path)

    def save(self, artifact: Dict[str, Any], name: str, **kwargs) -> Path:
        """Write a document, stamping created_at."""
        document = dict(artifact)
        document.setdefault('created_at', datetime.now(timezone.utc).isoformat())
        path = self.path_for(name)
        self._write_data(path, document)
        return path

    def delete(self, name: str) -> bool:
        """Delete a document by name."""
        path = self.path_for(name)
        if path.exists():
            path.unlink()
            return True
        return False


class ManifestRepository(JSONRepositoryBase):
    """Run manifests: resolved config, seeds and per-run results."""

    def record(self, command: str, config: Dict[str, Any], results: Optional[Dict[str, Any]] = None,
               argv: Optional[List[str]] = None, name: str = 'manifest') -> Path:
        """Write the manifest of one CLI run."""
        manifest = {
            'format': MANIFEST_FORMAT,
            'ssbench_version': __version__,
            'command': command,
            'argv': list(argv or []),
            'config': config,
            'seeds': config.get('seeds') or [config.get('seed')],
            'results': results or {},
        }
        return self.save(manifest, name)

    def find_by_name(self, name: str) -> Optional[Dict[str, Any]]:
        manifest = super().find_by_name(name)
        if manifest is not None:
            check_format(manifest.get('format', ''), 'manifest')
        return manifest


class ReportRepository(JSONRepositoryBase):
    """Transfer reports serialized as "report-v1" documents."""

    def save(self, artifact, name: str = 'report', **kwargs) -> Path:
        document = artifact.to_dict() if hasattr(artifact, 'to_dict') else dict(artifact)
        document['format'] = REPORT_FORMAT
        path = self.path_for(name)
        self._write_data(path, document)
        return path

    def find_by_name(self, name: str = 'report'):
        from ..evaluation.report import TransferReport

        document = super().find_by_name(name)
        if document is None:
            return None
        check_format(document.get('format', ''), 'report')
        return TransferReport.from_dict(document)
