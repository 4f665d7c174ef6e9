"""
Tests for run configuration resolution.
"""
import json
import os

import pytest

from ssbench import __version__, create_runtime
from ssbench.config import (
    RunConfig, config_digest, load_config_file, parse_ranges, parse_values, resolve_config,
)
from ssbench.errors import ConfigError
from ssbench.formats import MANIFEST_FORMAT


def write_json(directory, name, document):
    path = os.path.join(directory, name)
    with open(path, 'w') as f:
        json.dump(document, f)
    return path


class TestRunConfig:
    """Tests for RunConfig construction."""

    def test_defaults(self):
        """Test the documented defaults."""
        config = RunConfig()
        assert (config.seed, config.workers, config.limit) == (0, 1, 200)
        assert config.attacks == ['knn', 'ss-knn']
        assert config.run_seeds == [0]

    def test_kebab_case_keys(self):
        """Test that kebab-case keys map onto fields."""
        config = RunConfig.from_mapping({'per-class': 7, 'binary-search-steps': 0})
        assert config.per_class == 7
        assert config.binary_search_steps == 0

    def test_unknown_keys(self):
        """Test that unknown keys are named in the error."""
        with pytest.raises(ConfigError, match='Unknown config keys: bogus'):
            RunConfig.from_mapping({'seed': 1, 'bogus': 2})

    def test_invalid_values(self):
        """Test field validation."""
        with pytest.raises(ConfigError):
            RunConfig(workers=0)
        with pytest.raises(ConfigError):
            RunConfig(split='validation')

    def test_merged_ignores_none(self):
        """Test that None overrides keep the current value."""
        config = RunConfig(seed=4).merged({'seed': None, 'limit': 9})
        assert (config.seed, config.limit) == (4, 9)

    def test_dataset_dir_default(self):
        """Test that the dataset lives under the output directory by default."""
        assert str(RunConfig(output_dir='out').dataset_dir) == os.path.join('out', 'data')


class TestResolveConfig:
    """Tests for precedence across file, environment and flags."""

    def test_precedence(self, temp_dir):
        """Test defaults < file < SSBENCH_SEED < flags."""
        path = write_json(temp_dir, 'c.json', {'seed': 1, 'limit': 50, 'workers': 2})
        config = resolve_config(path, {'workers': 3}, environ={'SSBENCH_SEED': '9'})
        assert (config.seed, config.limit, config.workers) == (9, 50, 3)
        flagged = resolve_config(path, {'seed': 5}, environ={'SSBENCH_SEED': '9'})
        assert flagged.seed == 5

    def test_bad_seed_variable(self):
        """Test that a non-integer SSBENCH_SEED is rejected."""
        with pytest.raises(ConfigError, match='SSBENCH_SEED'):
            resolve_config(None, None, environ={'SSBENCH_SEED': 'abc'})

    def test_manifest_as_config(self, temp_dir):
        """Test that a run manifest contributes its config object."""
        manifest = {'format': MANIFEST_FORMAT, 'ssbench_version': __version__, 'command': 'eval',
                    'config': {'seed': 3, 'attacks': ['ss-aof']}}
        path = write_json(temp_dir, 'manifest.json', manifest)
        config = resolve_config(path, environ={})
        assert config.seed == 3
        assert config.attacks == ['ss-aof']

    def test_manifest_of_newer_format(self, temp_dir):
        """Test that an unsupported manifest version is a config error."""
        path = write_json(temp_dir, 'm.json', {'format': 'manifest-v7', 'config': {}})
        with pytest.raises(ConfigError, match='newer'):
            load_config_file(path)

    def test_invalid_json_names_line(self, temp_dir):
        """Test that JSON syntax errors report the line."""
        path = os.path.join(temp_dir, 'bad.json')
        with open(path, 'w') as f:
            f.write('{\n"seed": 1,\n}')
        with pytest.raises(ConfigError, match=r'bad\.json:3'):
            load_config_file(path)

    def test_missing_file(self, temp_dir):
        """Test that a missing file is a config error."""
        with pytest.raises(ConfigError, match='does not exist'):
            load_config_file(os.path.join(temp_dir, 'nope.json'))


class TestCreateRuntime:
    """Tests for create_runtime."""

    def test_creates_output_dir(self, temp_dir):
        """Test that the output directory is created."""
        output = os.path.join(temp_dir, 'nested', 'run')
        config = create_runtime({'output_dir': output}, environ={})
        assert os.path.isdir(output)
        assert config.output_dir == output


class TestConfigDigest:
    """Tests for config_digest."""

    def test_key_order_irrelevant(self):
        """Test that the digest is canonical."""
        assert config_digest({'a': 1, 'b': [1, 2]}) == config_digest({'b': [1, 2], 'a': 1})
        assert config_digest({'a': 1}) != config_digest({'a': 2})


class TestParseValues:
    """Tests for parse_values and parse_ranges."""

    def test_inclusive_range(self):
        """Test '0.1:1.0:0.1' gives ten values ending at 1.0."""
        values = parse_values('0.1:1.0:0.1')
        assert len(values) == 10
        assert values[0] == 0.1 and values[-1] == 1.0
        assert values[2] == 0.3

    def test_list(self):
        """Test a comma-separated list."""
        assert parse_values('0.01, 0.04,0.05') == [0.01, 0.04, 0.05]

    @pytest.mark.parametrize('text', ['a,b', '1:2', '1:0:0.5', '0:1:0', ''])
    def test_invalid(self, text):
        """Test malformed value specifications."""
        with pytest.raises(ConfigError):
            parse_values(text)

    def test_ranges(self):
        """Test deformation range parsing."""
        assert parse_ranges('none,0.9/1.1, 0.5/1.5') == [None, (0.9, 1.1), (0.5, 1.5)]
        with pytest.raises(ConfigError):
            parse_ranges('0.9-1.1')
