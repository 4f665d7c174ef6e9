"""
"ckpt-v1" checkpoint container.

Layout: little-endian uint32 header length, UTF-8 JSON header, then the
tensors as contiguous little-endian float32 blobs. The header records the
format version, the model kind and spec, and name/shape/offset of every
tensor, so a checkpoint can be rebuilt without any other file.
"""

import json
import logging
import struct
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import torch
import torch.nn as nn

from ..errors import FormatError, ModelError
from ..formats import CHECKPOINT_FORMAT, check_format
from ..models.autoencoder import AutoencoderSpec, PointAutoencoder
from ..models.classifiers import ClassifierSpec, build_classifier
from .base import ArtifactRepository

logger = logging.getLogger(__name__)

SUFFIX = '.ckpt'


def _model_kind(model: nn.Module) -> str:
    if isinstance(model, PointAutoencoder):
        return 'autoencoder'
    if isinstance(getattr(model, 'spec', None), ClassifierSpec):
        return 'classifier'
    raise ModelError(f"cannot checkpoint {type(model).__name__}: no ClassifierSpec/AutoencoderSpec attached")


def encode_checkpoint(model: nn.Module, metadata: Optional[Dict[str, Any]] = None) -> bytes:
    kind = _model_kind(model)
    tensors = []
    blobs = []
    offset = 0
    for name, tensor in model.state_dict().items():
        blob = tensor.detach().cpu().numpy().astype('<f4').tobytes()
        tensors.append({'name': name, 'shape': list(tensor.shape), 'offset': offset, 'nbytes': len(blob)})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({
        'version': CHECKPOINT_FORMAT,
        'kind': kind,
        'spec': model.spec.to_dict(),
        'tensors': tensors,
        'metadata': metadata or {},
    }).encode('utf-8')
    return struct.pack('<I', len(header)) + header + b''.join(blobs)


def decode_header(data: bytes, source: str = '<checkpoint>') -> Dict[str, Any]:
    if len(data) < 4:
        raise FormatError(f"{source}: truncated checkpoint")
    (length,) = struct.unpack('<I', data[:4])
    try:
        header = json.loads(data[4:4 + length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{source}: unreadable checkpoint header ({e})")
    check_format(header.get('version', ''), 'ckpt')
    header['_payload_start'] = 4 + length
    return header


def decode_checkpoint(data: bytes, source: str = '<checkpoint>') -> nn.Module:
    header = decode_header(data, source)
    if header['kind'] == 'autoencoder':
        model = PointAutoencoder(AutoencoderSpec.from_dict(header['spec']))
    elif header['kind'] == 'classifier':
        model = build_classifier(ClassifierSpec.from_dict(header['spec']))
    else:
        raise FormatError(f"{source}: unknown model kind {header['kind']!r}")
    start = header['_payload_start']
    state = {}
    for entry in header['tensors']:
        begin = start + entry['offset']
        blob = data[begin:begin + entry['nbytes']]
        if len(blob) != entry['nbytes']:
            raise FormatError(f"{source}@{begin}: truncated tensor {entry['name']}")
        array = np.frombuffer(blob, dtype='<f4').reshape(entry['shape'])
        state[entry['name']] = torch.from_numpy(array.copy())
    model.load_state_dict(state)
    model.eval()
    model.checkpoint_metadata = header.get('metadata', {})
    return model


class CheckpointRepository(ArtifactRepository):
    """Directory of .ckpt files."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def path_for(self, name: str) -> Path:
        return self.data_dir / f"{name}{SUFFIX}"

    def find_all(self) -> List[str]:
        return sorted(p.stem for p in self.data_dir.glob(f"*{SUFFIX}"))

    def find_by_name(self, name: str) -> Optional[nn.Module]:
        path = self.path_for(name)
        if not path.exists():
            return None
        return load_checkpoint(path)

    def save(self, artifact: nn.Module, name: str, metadata: Optional[Dict[str, Any]] = None, **kwargs) -> Path:
        path = self.path_for(name)
        with self._lock:
            path.write_bytes(encode_checkpoint(artifact, metadata))
        logger.info(f"Checkpoint written to {path}")
        return path

    def delete(self, name: str) -> bool:
        path = self.path_for(name)
        if path.exists():
            path.unlink()
            return True
        return False


def load_checkpoint(path) -> nn.Module:
    path = Path(path)
    if not path.exists():
        raise ModelError(f"checkpoint {path} does not exist")
    return decode_checkpoint(path.read_bytes(), source=str(path))
