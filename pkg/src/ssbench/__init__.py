__version__ = '0.1.0'

import logging  # noqa: E402
import os  # noqa: E402

import numpy as np  # noqa: E402
import torch  # noqa: E402

from .config import RunConfig, resolve_config  # noqa: E402
from .repositories.factory import init_repository_factory  # noqa: E402

logger = logging.getLogger(__name__)


def create_runtime(test_config=None, config_file=None, environ=None) -> RunConfig:
    """Resolve the run configuration and prepare the process for a run.

    Creates the output directory, initializes the repository factory on it
    and seeds torch and numpy from the resolved seed.
    """
    config = resolve_config(config_file, test_config, environ)
    try:
        os.makedirs(config.output_dir, exist_ok=True)
    except OSError as e:
        logger.error(f"Cannot create output directory {config.output_dir}: {e}")
        raise
    init_repository_factory(config.output_dir)
    torch.manual_seed(config.seed)
    np.random.seed(config.seed % 2 ** 32)
    logger.info(f"ssbench {__version__}: output in {config.output_dir}, seed {config.seed}")
    return config
