from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, List, Optional


class ArtifactRepository(ABC):
    """Abstract base class for named run artifacts stored on disk."""

    @abstractmethod
    def find_all(self) -> List[str]:
        """Names of all stored artifacts."""
        pass

    @abstractmethod
    def find_by_name(self, name: str) -> Optional[Any]:
        """Load an artifact by name, None when absent."""
        pass

    @abstractmethod
    def save(self, artifact: Any, name: str, **kwargs) -> Path:
        """Persist an artifact and return its path."""
        pass

    @abstractmethod
    def delete(self, name: str) -> bool:
        """Delete an artifact by name."""
        pass
