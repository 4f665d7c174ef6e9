from pathlib import Path

from .checkpoint_repository import CheckpointRepository
from .json_repository import ManifestRepository, ReportRepository
from .point_files import PointFileRepository


class RepositoryFactory:
    """Factory for the repositories of one output directory."""

    def __init__(self, output_dir='runs', **kwargs):
        self.output_dir = Path(output_dir)
        self.config = kwargs
        self._repositories = {}

    def _get(self, key, build):
        if key not in self._repositories:
            self._repositories[key] = build()
        return self._repositories[key]

    def get_manifest_repository(self) -> ManifestRepository:
        """Get or create the manifest repository (output root)."""
        return self._get('manifest', lambda: ManifestRepository(self.output_dir))

    def get_report_repository(self) -> ReportRepository:
        """Get or create the report repository (output root)."""
        return self._get('report', lambda: ReportRepository(self.output_dir))

    def get_checkpoint_repository(self) -> CheckpointRepository:
        """Get or create the checkpoint repository."""
        models_dir = self.config.get('models_dir') or self.output_dir / 'models'
        return self._get('checkpoint', lambda: CheckpointRepository(models_dir))

    def get_point_repository(self, subdir: str = 'adversarial', suffix: str = '.pcb') -> PointFileRepository:
        """Get or create a point-file repository under the output directory."""
        return self._get(f"points:{subdir}:{suffix}",
                         lambda: PointFileRepository(self.output_dir / subdir, suffix))


# Global factory instance
_factory = None


def get_repository_factory() -> RepositoryFactory:
    """Get the global repository factory instance."""
    global _factory
    if _factory is None:
        _factory = RepositoryFactory()
    return _factory


def init_repository_factory(output_dir='runs', **kwargs) -> RepositoryFactory:
    """Initialize the global repository factory."""
    global _factory
    _factory = RepositoryFactory(output_dir, **kwargs)
    return _factory
