"""
Artifact format tags and producer-version checks.

Every persisted artifact carries a tag such as "ckpt-v1"; readers refuse tags
of another kind or of a newer version than this build understands.
"""

import logging
import re
from typing import Tuple

from packaging import version

from .errors import FormatError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'ckpt-v1'
REPORT_FORMAT = 'report-v1'
MANIFEST_FORMAT = 'manifest-v1'

SUPPORTED_FORMATS = {
    'ckpt': version.Version('1'),
    'report': version.Version('1'),
    'manifest': version.Version('1'),
}

_TAG_PATTERN = re.compile(r'^(?P<kind>[a-z]+)-v(?P<version>\d+(\.\d+)*)$')


def parse_format_tag(tag: str) -> Tuple[str, version.Version]:
    """Split "report-v1" into ("report", Version("1"))."""
    match = _TAG_PATTERN.match(tag or '')
    if not match:
        raise FormatError(f"Malformed format tag: {tag!r}")
    return match.group('kind'), version.Version(match.group('version'))


def check_format(tag: str, expected_kind: str) -> version.Version:
    """Validate a tag against the kind a reader expects."""
    kind, tag_version = parse_format_tag(tag)
    if kind != expected_kind:
        raise FormatError(f"Expected a {expected_kind} artifact, found {tag!r}")
    supported = SUPPORTED_FORMATS[kind]
    if tag_version > supported:
        raise FormatError(
            f"{tag!r} is newer than the supported {kind}-v{supported}; upgrade ssbench")
    return tag_version


def check_producer_version(recorded: str, current: str) -> bool:
    """Warn when an artifact was written by a different major release."""
    try:
        recorded_version = version.parse(recorded)
    except version.InvalidVersion:
        logger.warning(f"Unparseable producer version {recorded!r}")
        return False
    current_version = version.parse(current)
    if recorded_version.major != current_version.major:
        logger.warning(
            f"Artifact written by ssbench {recorded_version}, running {current_version}; "
            "results may not reproduce exactly")
        return False
    return True
