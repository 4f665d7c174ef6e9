"""
ssbench command line: gen-data, train, attack, defend, eval, sweep, report.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Every command
writes manifest.json into the output directory with the resolved config,
so `--config <manifest.json>` re-executes the run.
"""

import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click
import torch.nn as nn
from tqdm import tqdm

from . import create_runtime
from .attacks.config import AttackConfig
from .attacks.runner import run_attack
from .config import RunConfig, config_digest, parse_ranges, parse_values
from .dataset import SUPPORTED_SHAPES, DatasetSpec, generate_synthetic, load_dataset, write_dataset
from .defenses import DefenseConfig, apply_defense
from .errors import BenchmarkError, ConfigError, ModelError
from .evaluation.matrix import run_matrix
from .evaluation.report import emit_report
from .evaluation.robustness import SCALE_SWEEP, SHEAR_SWEEP
from .evaluation.sweeps import ROBUSTNESS_PARAMS, run_sweep
from .models.autoencoder import AutoencoderSpec, PointAutoencoder
from .models.classifiers import ClassifierSpec, build_classifier
from .models.training import train as train_classifier
from .models.training import train_autoencoder
from .repositories.checkpoint_repository import load_checkpoint
from .repositories.factory import get_repository_factory
from .repositories.json_repository import ReportRepository
from .repositories.point_files import list_point_files, read_point_file

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def _split_list(text: Optional[str]) -> Optional[List[str]]:
    if text is None:
        return None
    return [item.strip() for item in text.split(',') if item.strip()]


def _int_list(text: Optional[str]) -> Optional[List[int]]:
    items = _split_list(text)
    if items is None:
        return None
    try:
        return [int(item) for item in items]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}")


def _runtime(ctx: click.Context, command: str, overrides: Dict[str, Any]) -> RunConfig:
    """Resolve config for one command and prepare the output directory."""
    merged = dict(ctx.obj['overrides'])
    merged.update({k: v for k, v in overrides.items() if v is not None})
    config = create_runtime(merged, config_file=ctx.obj['config_file'])
    logging.getLogger().setLevel(config.log_level.upper())
    ctx.obj['command'] = command
    return config


def _record(ctx: click.Context, config: RunConfig, results: Dict[str, Any]) -> Path:
    path = get_repository_factory().get_manifest_repository().record(
        ctx.obj['command'], config.to_dict(), results, argv=ctx.obj['argv'])
    logger.info(f"Manifest written to {path}")
    return path


def load_model(reference: str) -> nn.Module:
    """A checkpoint path, or a checkpoint name in the output directory's models/."""
    path = Path(reference)
    if path.suffix == '.ckpt' or path.exists():
        return load_checkpoint(path)
    model = get_repository_factory().get_checkpoint_repository().find_by_name(reference)
    if model is None:
        raise ModelError(f"no checkpoint named {reference!r} (looked for {path} and the models directory)")
    return model


def _model_name(reference: str) -> str:
    return Path(reference).stem


def attack_config_from(config: RunConfig, name: str) -> AttackConfig:
    return AttackConfig.for_attack(
        name,
        p_a=config.pa,
        p_s=config.ps,
        epsilon=config.epsilon,
        iterations=config.iterations,
        lr=config.attack_lr,
        binary_search_steps=config.binary_search_steps,
        kappa=config.kappa,
        gamma=config.gamma,
        knn_k=config.knn_k,
        knn_threshold_alpha=config.knn_alpha,
        k_lf=config.k_lf,
        targeted=config.targeted,
        target_class=config.target_class,
        rng_seed=config.seed,
    )


def defense_config_from(config: RunConfig, name: str) -> DefenseConfig:
    return DefenseConfig(kind=name, srs_drop=config.srs_drop, sor_k=config.sor_k,
                         sor_alpha=config.sor_alpha, rng_seed=config.seed)


def _load_autoencoder(config: RunConfig, attacks: Sequence[AttackConfig]) -> Optional[PointAutoencoder]:
    if not any(cfg.attack.value == 'advpc' for cfg in attacks):
        return None
    if not config.autoencoder:
        raise ConfigError("advpc attacks need --autoencoder")
    ae = load_model(config.autoencoder)
    if not isinstance(ae, PointAutoencoder):
        raise ModelError(f"{config.autoencoder} is not an autoencoder checkpoint")
    return ae


def _load_models(config: RunConfig) -> Dict[str, nn.Module]:
    if not config.models:
        raise ConfigError("no models given (use --models a.ckpt,b.ckpt)")
    return {_model_name(ref): load_model(ref) for ref in config.models}


def _store_run_option(ctx: click.Context, param: click.Parameter, value):
    """Collect run-wide options given before or after the command name."""
    if value is None:
        return value
    obj = ctx.ensure_object(dict)
    if param.name == 'config_file':
        obj['config_file'] = value
    else:
        obj.setdefault('overrides', {})[param.name] = value.upper() if param.name == 'log_level' else value
    return value


def run_options(func):
    options = [
        click.option('--config', 'config_file', type=click.Path(dir_okay=False), expose_value=False,
                     callback=_store_run_option, help='Flat JSON config or a run manifest to re-execute.'),
        click.option('--seed', type=int, expose_value=False, callback=_store_run_option,
                     help='Global random seed.'),
        click.option('--output-dir', expose_value=False, callback=_store_run_option,
                     help='Directory for every artifact of the run.'),
        click.option('--workers', type=int, expose_value=False, callback=_store_run_option,
                     help='Concurrent attack/evaluation workers.'),
        click.option('--log-level', type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
                     expose_value=False, callback=_store_run_option, help='Log level (default INFO).'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group(context_settings={'help_option_names': ['-h', '--help']})
@run_options
@click.pass_context
def cli(ctx):
    """Transferable scale-and-shear attacks on point-cloud classifiers."""
    obj = ctx.ensure_object(dict)
    obj.setdefault('argv', [])
    obj.setdefault('config_file', None)
    obj.setdefault('overrides', {})
    level = obj['overrides'].get('log_level') or 'INFO'
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


@cli.command('gen-data')
@run_options
@click.option('--classes', type=int, default=None, help=f"Number of shape classes (max {len(SUPPORTED_SHAPES)}).")
@click.option('--per-class', type=int, default=None, help='Clouds per class.')
@click.option('--points', type=int, default=None, help='Points per cloud.')
@click.option('--noise', type=float, default=None, help='Gaussian jitter sigma.')
@click.option('--train-fraction', type=float, default=None)
@click.option('--data-dir', default=None, help='Dataset directory (default <output-dir>/data).')
@click.pass_context
def gen_data(ctx, classes, per_class, points, noise, train_fraction, data_dir):
    """Generate the synthetic shape dataset."""
    config = _runtime(ctx, 'gen-data', {'classes': classes, 'per_class': per_class, 'points': points,
                                        'noise': noise, 'train_fraction': train_fraction, 'data_dir': data_dir})
    if not 1 <= config.classes <= len(SUPPORTED_SHAPES):
        raise ConfigError(f"classes must lie in [1, {len(SUPPORTED_SHAPES)}], got {config.classes}")
    spec = DatasetSpec(classes=SUPPORTED_SHAPES[:config.classes], samples_per_class=config.per_class,
                       points_per_cloud=config.points, noise_sigma=config.noise,
                       split=(config.train_fraction, 1.0 - config.train_fraction), rng_seed=config.seed)
    dataset = generate_synthetic(spec)
    directory = write_dataset(dataset, config.dataset_dir)
    click.echo(f"{len(dataset.train)} train / {len(dataset.test)} test clouds written to {directory}")
    _record(ctx, config, {'data_dir': str(directory), 'classes': dataset.classes,
                          'train': len(dataset.train), 'test': len(dataset.test)})


@cli.command('train')
@run_options
@click.option('--architecture', type=click.Choice(['pointwise-maxpool', 'edge-conv']), default=None)
@click.option('--widths', default=None, help='Comma-separated layer widths.')
@click.option('--edge-k', type=int, default=None, help='Neighbours of the edge-conv graph.')
@click.option('--epochs', type=int, default=None)
@click.option('--lr', type=float, default=None)
@click.option('--batch-size', type=int, default=None)
@click.option('--augment/--no-augment', default=None, help='Random anisotropic scaling during training.')
@click.option('--model-name', default=None, help='Checkpoint name (default: the architecture).')
@click.option('--autoencoder', 'train_ae', is_flag=True, help='Train the point autoencoder instead.')
@click.option('--data-dir', default=None)
@click.pass_context
def train(ctx, architecture, widths, edge_k, epochs, lr, batch_size, augment, model_name, train_ae, data_dir):
    """Train a classifier (or the autoencoder) and checkpoint it."""
    config = _runtime(ctx, 'train', {'architecture': architecture, 'widths': _int_list(widths), 'edge_k': edge_k,
                                     'epochs': epochs, 'lr': lr, 'batch_size': batch_size, 'augment': augment,
                                     'model_name': model_name, 'data_dir': data_dir})
    dataset = load_dataset(config.dataset_dir, rng_seed=config.seed)
    repo = get_repository_factory().get_checkpoint_repository()
    if train_ae:
        ae = PointAutoencoder(AutoencoderSpec(latent_dim=config.autoencoder_latent,
                                              decoder_points=config.points))
        result = train_autoencoder(ae, dataset, epochs=config.autoencoder_epochs, lr=config.lr,
                                   batch_size=config.batch_size, rng_seed=config.seed, checkpoint_repo=repo,
                                   checkpoint_name=config.model_name or 'autoencoder')
        click.echo(f"autoencoder test chamfer {result.test_accuracy:.5f} -> {result.checkpoint_path}")
        _record(ctx, config, {'checkpoint': result.checkpoint_path, 'test_chamfer': result.test_accuracy,
                              'history': result.history})
        return
    spec = ClassifierSpec(architecture=config.architecture, widths=tuple(config.widths),
                          num_classes=dataset.num_classes, knn_k=config.edge_k)
    result = train_classifier(build_classifier(spec), dataset, epochs=config.epochs, lr=config.lr,
                              batch_size=config.batch_size, rng_seed=config.seed,
                              augment_scale=(0.8, 1.25) if config.augment else None,
                              checkpoint_repo=repo, checkpoint_name=config.model_name or config.architecture)
    click.echo(f"{config.architecture} test accuracy {result.test_accuracy:.2f}% -> {result.checkpoint_path}")
    _record(ctx, config, {'checkpoint': result.checkpoint_path, 'test_accuracy': result.test_accuracy,
                          'history': result.history})


@cli.command('attack')
@run_options
@click.option('--attack', default=None, help='3d-adv, knn, advpc, aof, none, or ss-<attack>.')
@click.option('--victim', default=None, help='Victim checkpoint path or name.')
@click.option('--autoencoder', default=None, help='Autoencoder checkpoint (advpc).')
@click.option('--pa', type=float, default=None, help='SS probability of transforming at all.')
@click.option('--ps', type=float, default=None, help='SS probability of scale given a transform.')
@click.option('--epsilon', type=float, default=None, help='l-inf budget.')
@click.option('--iterations', type=int, default=None)
@click.option('--attack-lr', type=float, default=None)
@click.option('--binary-search-steps', type=int, default=None)
@click.option('--kappa', type=float, default=None)
@click.option('--gamma', type=float, default=None)
@click.option('--knn-k', type=int, default=None)
@click.option('--k-lf', type=int, default=None)
@click.option('--targeted/--untargeted', default=None)
@click.option('--target-class', type=int, default=None)
@click.option('--split', type=click.Choice(['train', 'test']), default=None)
@click.option('--limit', type=int, default=None, help='Number of samples to attack.')
@click.option('--data-dir', default=None)
@click.pass_context
def attack(ctx, attack, victim, autoencoder, pa, ps, epsilon, iterations, attack_lr, binary_search_steps, kappa,
           gamma, knn_k, k_lf, targeted, target_class, split, limit, data_dir):
    """Craft adversarial clouds against one victim."""
    config = _runtime(ctx, 'attack', {
        'attack': attack, 'victim': victim, 'autoencoder': autoencoder, 'pa': pa, 'ps': ps, 'epsilon': epsilon,
        'iterations': iterations, 'attack_lr': attack_lr, 'binary_search_steps': binary_search_steps,
        'kappa': kappa, 'gamma': gamma, 'knn_k': knn_k, 'k_lf': k_lf, 'targeted': targeted,
        'target_class': target_class, 'split': split, 'limit': limit, 'data_dir': data_dir})
    if not config.victim:
        raise ConfigError("attack needs --victim")
    cfg = attack_config_from(config, config.attack)
    model = load_model(config.victim)
    ae = _load_autoencoder(config, [cfg])
    clouds = load_dataset(config.dataset_dir, rng_seed=config.seed).subset(config.split, config.limit)
    repo = get_repository_factory().get_point_repository(f"adversarial/{cfg.name}")

    failures = []

    def attack_one(cloud):
        try:
            return run_attack(model, cloud, cfg, ae=ae)
        except BenchmarkError as e:
            logger.warning(f"{cfg.name} failed on {cloud.id}: {e}")
            failures.append({'sample': cloud.id, 'error': f"{type(e).__name__}: {e}"})
            return None

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        outcomes = list(tqdm(pool.map(attack_one, clouds), total=len(clouds), desc=cfg.name, disable=None))
    results = [r for r in outcomes if r is not None]
    for result in results:
        repo.save(result.adversarial)
    # Failed samples count as unsuccessful.
    success = 100.0 * sum(r.success for r in results) / len(outcomes) if outcomes else 0.0
    click.echo(f"{cfg.name} on {_model_name(config.victim)}: white-box success {success:.1f}% "
               f"over {len(outcomes)} samples ({len(failures)} failed) -> {repo.data_dir}")
    _record(ctx, config, {'attack_config': cfg.to_dict(), 'victim': config.victim, 'success_rate': success,
                          'adversarial_dir': str(repo.data_dir), 'samples': [r.to_dict() for r in results],
                          'failures': sorted(failures, key=lambda f: f['sample'])})


@cli.command('defend')
@run_options
@click.option('--defense', type=click.Choice(['none', 'srs', 'sor']), default=None)
@click.option('--srs-drop', type=int, default=None, help='Points SRS drops (default N/2).')
@click.option('--sor-k', type=int, default=None)
@click.option('--sor-alpha', type=float, default=None)
@click.option('--input', 'input_dir', required=True, type=click.Path(file_okay=False, exists=True),
              help='Directory of point files to purify.')
@click.pass_context
def defend(ctx, defense, srs_drop, sor_k, sor_alpha, input_dir):
    """Apply SRS or SOR to a directory of point files."""
    config = _runtime(ctx, 'defend', {'defense': defense, 'srs_drop': srs_drop, 'sor_k': sor_k,
                                      'sor_alpha': sor_alpha})
    defense_cfg = defense_config_from(config, config.defense)
    repo = get_repository_factory().get_point_repository(f"defended/{defense_cfg.name}")
    counts = {}
    for path in list_point_files(input_dir):
        cloud, _ = read_point_file(path)
        defended = apply_defense(cloud, defense_cfg)
        repo.save(defended, name=path.stem)
        counts[path.stem] = {'before': cloud.num_points, 'after': defended.num_points}
    click.echo(f"{defense_cfg.name}: {len(counts)} clouds -> {repo.data_dir}")
    _record(ctx, config, {'defense_config': defense_cfg.to_dict(), 'input': str(input_dir), 'clouds': counts})


def _matrix_options(func):
    options = [
        click.option('--models', default=None, help='Comma-separated checkpoints (first is the victim unless '
                                                    '--all-victims).'),
        click.option('--attacks', default=None, help='Comma-separated attack names.'),
        click.option('--defenses', default=None, help='Comma-separated defenses (none, srs, sor).'),
        click.option('--seeds', default=None, help='Comma-separated seeds (default: --seed).'),
        click.option('--limit', type=int, default=None, help='Test samples per victim.'),
        click.option('--iterations', type=int, default=None),
        click.option('--epsilon', type=float, default=None),
        click.option('--pa', type=float, default=None),
        click.option('--ps', type=float, default=None),
        click.option('--targeted/--untargeted', default=None),
        click.option('--autoencoder', default=None),
        click.option('--data-dir', default=None),
        click.option('--all-victims', is_flag=True, help='Attack with every model as victim.'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _matrix_overrides(models, attacks, defenses, seeds, limit, iterations, epsilon, pa, ps, targeted,
                      autoencoder, data_dir) -> Dict[str, Any]:
    return {'models': _split_list(models), 'attacks': _split_list(attacks), 'defenses': _split_list(defenses),
            'seeds': _int_list(seeds), 'limit': limit, 'iterations': iterations, 'epsilon': epsilon,
            'pa': pa, 'ps': ps, 'targeted': targeted, 'autoencoder': autoencoder, 'data_dir': data_dir}


def _emit(config: RunConfig, report, name: str = 'report') -> List[Path]:
    report.config_digest = config_digest(config.to_dict())
    return emit_report(report, config.output_dir, formats=config.formats, name=name)


@cli.command('eval')
@run_options
@_matrix_options
@click.pass_context
def evaluate(ctx, models, attacks, defenses, seeds, limit, iterations, epsilon, pa, ps, targeted, autoencoder,
             data_dir, all_victims):
    """Run the victim x transfer x attack x defense matrix and write the report."""
    config = _runtime(ctx, 'eval', _matrix_overrides(models, attacks, defenses, seeds, limit, iterations,
                                                     epsilon, pa, ps, targeted, autoencoder, data_dir))
    loaded = _load_models(config)
    attack_cfgs = [attack_config_from(config, name) for name in config.attacks]
    defense_cfgs = [defense_config_from(config, name) for name in config.defenses]
    clouds = load_dataset(config.dataset_dir, rng_seed=config.seed).subset(config.split)
    report = run_matrix(loaded, attack_cfgs, defense_cfgs, clouds, seeds=config.run_seeds,
                        workers=config.workers, autoencoder=_load_autoencoder(config, attack_cfgs),
                        limit=config.limit, victims=None if all_victims else [next(iter(loaded))])
    written = _emit(config, report)
    for entry in report.entries:
        kind = 'white-box' if entry.white_box else 'black-box'
        click.echo(f"{entry.attack:>10} {entry.victim}->{entry.transfer} [{entry.defense}] ({kind}): "
                   f"T_rans {entry.trans:.2f} +- {entry.trans_std:.2f}")
    _record(ctx, config, {'report': [str(p) for p in written], 'config_digest': report.config_digest,
                          'entries': [e.to_dict() for e in report.entries], 'errors': report.errors})


@cli.command('sweep')
@run_options
@click.option('--param', type=click.Choice(['pa', 'ps', 'iterations', 'budget', 'scale', 'shear']), default=None)
@click.option('--values', default=None, help="'start:stop:step', 'a,b,c', or 'low/high,...' for scale/shear.")
@_matrix_options
@click.pass_context
def sweep(ctx, param, values, models, attacks, defenses, seeds, limit, iterations, epsilon, pa, ps, targeted,
          autoencoder, data_dir, all_victims):
    """Rerun the matrix (or the robustness check) across values of one parameter."""
    overrides = _matrix_overrides(models, attacks, defenses, seeds, limit, iterations, epsilon, pa, ps,
                                  targeted, autoencoder, data_dir)
    overrides.update({'param': param, 'values': values})
    config = _runtime(ctx, 'sweep', overrides)
    if not config.param:
        raise ConfigError("sweep needs --param")
    loaded = _load_models(config)
    clouds = load_dataset(config.dataset_dir, rng_seed=config.seed).subset(config.split)
    if config.param in ROBUSTNESS_PARAMS:
        default = SCALE_SWEEP if config.param == 'scale' else SHEAR_SWEEP
        sweep_values = parse_ranges(config.values) if config.values else list(default)
        report = run_sweep(config.param, sweep_values, loaded, [], clouds, seeds=config.run_seeds)
    else:
        if not config.values:
            raise ConfigError(f"sweeping {config.param} needs --values")
        attack_cfgs = [attack_config_from(config, name) for name in config.attacks]
        report = run_sweep(config.param, parse_values(config.values), loaded, attack_cfgs, clouds,
                           defenses=[defense_config_from(config, name) for name in config.defenses],
                           seeds=config.run_seeds, workers=config.workers,
                           autoencoder=_load_autoencoder(config, attack_cfgs), limit=config.limit,
                           victims=None if all_victims else [next(iter(loaded))])
    written = _emit(config, report)
    click.echo(f"{config.param} sweep: {len(report.entries) or len(report.robustness)} rows -> {config.output_dir}")
    _record(ctx, config, {'report': [str(p) for p in written], 'config_digest': report.config_digest,
                          'errors': report.errors})


@cli.command('report')
@run_options
@click.option('--report', 'report_path', default=None, help='report.json to re-render (default <output-dir>).')
@click.option('--formats', default=None, help='Comma-separated subset of csv,json,svg.')
@click.pass_context
def report(ctx, report_path, formats):
    """Re-render CSV and SVG files from a stored report.json."""
    config = _runtime(ctx, 'report', {'report': report_path, 'formats': _split_list(formats)})
    path = Path(config.report) if config.report else Path(config.output_dir) / 'report.json'
    factory = get_repository_factory()
    repo = factory.get_report_repository() if path.parent == factory.output_dir else ReportRepository(path.parent)
    stored = repo.find_by_name(path.stem)
    if stored is None:
        raise ConfigError(f"no report at {path}")
    formats = [f for f in config.formats if f != 'json'] if path.parent == Path(config.output_dir) \
        else config.formats
    written = emit_report(stored, config.output_dir, formats=formats, name=path.stem)
    click.echo(f"{len(stored.entries)} entries rendered to {config.output_dir}")
    _record(ctx, config, {'source': str(path), 'written': [str(p) for p in written]})


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        result = cli.main(args=argv, prog_name='ssbench', standalone_mode=False, obj={'argv': argv})
    except click.UsageError as e:
        e.show()
        return 1
    except click.Abort:
        click.echo('Aborted!', err=True)
        return 1
    except BenchmarkError as e:
        logger.error(f"{type(e).__name__}: {e}")
        click.echo(f"Error: {e}", err=True)
        return 2
    except click.ClickException as e:
        e.show()
        return 2
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        return 2
    return result if isinstance(result, int) else 0


def run():
    sys.exit(main())
