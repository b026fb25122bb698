"""
Command-line interface for vmspod.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .archive import (
    MANIFEST_NAME,
    load_basis,
    load_snapshots,
    save_basis,
    save_snapshots,
    save_trajectory,
)
from .config import (
    CONFIG_FILENAME,
    PRESETS,
    RunConfig,
    init_run,
    resolve_output_dir,
    setup_logging,
)
from .errors import ConfigError
from .experiments import EXPERIMENT_NAMES, REPORT_FIELDS, Study, run_experiment
from .pod import InnerProduct, tail_sum
from .rom import ModelKind, RomRun
from .utils import format_float, read_csv, write_csv


# RunConfig fields settable from the command line.
OVERRIDE_FIELDS = (
    'epsilon', 'b', 'g', 'T', 'solution', 'width',
    'nx', 'degree', 'dt', 'stride', 'quad_refine',
    'inner_product', 'rank_tol', 'quotients',
    'r', 'R', 'alpha', 'model',
    'concurrency', 'seed',
)


def resolve_config(args, fresh: bool = False) -> RunConfig:
    """
    Effective configuration: flags over VMSPOD_OUTPUT_DIR over the config
    file (or the run's saved config.ini) over the preset.
    """
    if args.config is not None:
        config = RunConfig.load(args.config)
    else:
        config = RunConfig.preset(args.preset)
        saved = resolve_output_dir(args.output, config) / CONFIG_FILENAME
        if not fresh and saved.exists():
            config = RunConfig.load(saved)
    config = config.override(**{name: getattr(args, name, None) for name in OVERRIDE_FIELDS})
    config.output_dir = resolve_output_dir(args.output, config)
    return config.validate()


def _run_manifest(config: RunConfig) -> dict:
    return {
        'nx': config.nx,
        'degree': config.degree,
        'dns_dt': config.dt,
        'stride': config.stride,
        'T': config.T,
        'epsilon': config.epsilon,
        'b': list(config.b),
        'g': config.g,
        'solution': config.solution,
        'width': config.width,
        'quad_refine': config.quad_refine,
    }


def open_study(config: RunConfig, build_missing: bool = False) -> Study:
    """
    Study over the run's archived snapshots and basis. Missing artifacts are
    computed and archived when build_missing is set.
    """
    logger = logging.getLogger('vmspod.cli')
    paths = config.get_paths()
    study = Study(config)

    if (paths['snapshots'] / MANIFEST_NAME).exists() or not build_missing:
        study.attach(snapshots=load_snapshots(paths['snapshots'], study.space.tag))
    else:
        logger.info("No snapshots yet; running the DNS first")
        save_snapshots(paths['snapshots'], study.snapshots, run=_run_manifest(config))

    if (paths['basis'] / MANIFEST_NAME).exists():
        basis, projected = load_basis(paths['basis'], study.space.tag)
        if basis.inner_product is config.inner_product_kind and basis.quotients == config.quotients:
            study.attach(basis=basis, projected=projected)
            return study
        logger.info(
            f"Archived basis ({basis.inner_product.value}, quotients={basis.quotients}) does not match "
            f"the configuration ({config.inner_product}, quotients={config.quotients}); recomputing"
        )
    elif not build_missing:
        raise FileNotFoundError(f"No basis found in {paths['basis']}. Run 'pod' command first.")
    save_basis(paths['basis'], study.basis, study.projected, study.space.tag, run=_run_manifest(config))
    return study


def do_dns(config: RunConfig) -> Study:
    logger = logging.getLogger('vmspod.cli')
    study = Study(config)
    snapshots = study.snapshots
    save_snapshots(config.get_paths()['snapshots'], snapshots, run=_run_manifest(config))
    monitor = snapshots.stability
    if monitor is not None:
        logger.info(f"Stability bound: max ||u^n||/bound = {monitor.max_ratio:.6f}, {len(monitor.violations)} violations")
    logger.info(f"Average DNS L2 error: {format_float(study.dns_error)}")
    return study


def do_pod(config: RunConfig, study: Optional[Study] = None):
    logger = logging.getLogger('vmspod.cli')
    paths = config.get_paths()
    if study is None:
        study = Study(config)
        study.attach(snapshots=load_snapshots(paths['snapshots'], study.space.tag))
    basis = study.basis
    save_basis(paths['basis'], basis, study.projected, study.space.tag, run=_run_manifest(config))

    logger.info(f"POD rank d = {basis.rank} ({basis.snapshot_count} snapshots, {basis.inner_product.value})")
    for k in sorted({config.R, config.r}):
        if k <= basis.rank:
            logger.info(f"Tail sum beyond {k} modes: {format_float(tail_sum(basis, k))}")
    if config.r > basis.rank:
        raise ConfigError('r', f"r={config.r} exceeds the POD rank d={basis.rank}")
    return basis


def do_rom(config: RunConfig, kind: ModelKind, study: Optional[Study] = None) -> RomRun:
    logger = logging.getLogger('vmspod.cli')
    paths = config.get_paths()
    study = study or open_study(config)
    if config.r > study.rank:
        raise ConfigError('r', f"r={config.r} exceeds the POD rank d={study.rank}")

    if kind is ModelKind.VMS_POD:
        alpha = config.alpha_value
        if alpha is None:
            alpha = study.select_alpha(config.r, config.R)
            logger.info(f"Selected alpha* = {format_float(alpha)} for r={config.r}, R={config.R}")
        run = study.run(kind, config.r, config.R, alpha)
    else:
        run = study.run(kind, config.r)

    save_trajectory(paths['rom'], run.trajectory)
    report_path = paths['report']
    rows = read_csv(report_path) if report_path.exists() else []
    rows.append(run.report.row())
    write_csv(report_path, REPORT_FIELDS, rows)

    report = run.report
    logger.info(
        f"{kind.value} r={config.r}: alpha={format_float(report.alpha_used)}, "
        f"average L2 error e={format_float(report.e)} "
        f"(e1={report.e1:.3e}, e2={report.e2:.3e}, e3={report.e3:.3e})"
    )
    return run


def cmd_dns(args):
    """Run the DNS and archive its snapshots."""
    config = init_run(resolve_config(args, fresh=True))
    logger = setup_logging(config, verbose=args.verbose)
    logger.info(f"vmspod v{__version__}")
    logger.info(f"DNS on nx={config.nx}, P{config.degree}, dt={config.dt:g}, T={config.T:g}, eps={config.epsilon:g}")

    study = do_dns(config)
    logger.info(f"Next step: vmspod pod --output {config.output_dir}")
    return study


def cmd_pod(args):
    """Build the POD basis from archived snapshots."""
    config = init_run(resolve_config(args))
    logger = setup_logging(config, verbose=args.verbose)
    logger.info(f"POD of {config.output_dir} in {config.inner_product}")

    basis = do_pod(config)
    logger.info(f"Next step: vmspod rom --output {config.output_dir} --model {config.model}")
    return basis


def cmd_rom(args):
    """Integrate a reduced model on the archived basis."""
    config = init_run(resolve_config(args))
    logger = setup_logging(config, verbose=args.verbose)
    logger.info(f"{config.model} with r={config.r}, R={config.R}, alpha={config.alpha}")
    return do_rom(config, config.model_kind)


def cmd_experiment(args):
    """Reproduce one of the error studies as CSV tables."""
    config = init_run(resolve_config(args))
    logger = setup_logging(config, verbose=args.verbose)
    logger.info(f"Experiment {args.name} ({config.output_dir})")

    study = None
    if args.name not in ('table4', 'convergence'):
        study = open_study(config, build_missing=True)
    result = run_experiment(args.name, config, study=study)
    result.write(config.get_paths()['tables'])

    for key, value in result.summary.items():
        logger.info(f"{key}: {format_float(value)}")
    return result


def cmd_run(args):
    """Run the complete pipeline: dns, pod, POD-G and VMS-POD."""
    config = init_run(resolve_config(args, fresh=True))
    logger = setup_logging(config, verbose=args.verbose)

    logger.info("=" * 60)
    logger.info("STEP 1: DNS")
    logger.info("=" * 60)
    study = do_dns(config)

    logger.info("")
    logger.info("=" * 60)
    logger.info("STEP 2: POD")
    logger.info("=" * 60)
    do_pod(config, study)

    logger.info("")
    logger.info("=" * 60)
    logger.info("STEP 3: Reduced models")
    logger.info("=" * 60)
    podg = do_rom(config, ModelKind.POD_G, study)
    vms = do_rom(config, ModelKind.VMS_POD, study)

    logger.info("")
    logger.info("=" * 60)
    logger.info(
        f"COMPLETE: DNS {study.dns_error:.3e}, POD-G {podg.report.e:.3e}, VMS-POD {vms.report.e:.3e}"
    )
    logger.info("=" * 60)
    return podg, vms


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=Path, help='INI configuration file')
    parser.add_argument('--preset', choices=sorted(PRESETS), default='desk', help='Parameter preset (default: desk)')
    parser.add_argument('--output', type=Path, help='Run directory (overrides $VMSPOD_OUTPUT_DIR)')

    problem = parser.add_argument_group('problem')
    problem.add_argument('--epsilon', type=float, help='Diffusion coefficient')
    problem.add_argument('--b', type=float, nargs=2, metavar=('BX', 'BY'), help='Convection field')
    problem.add_argument('--g', type=float, help='Reaction coefficient')
    problem.add_argument('--T', type=float, help='Final time')
    problem.add_argument('--solution', choices=['tanh-front', 'zero'], help='Manufactured solution')
    problem.add_argument('--width', type=float, help='Front width of the tanh solution')

    disc = parser.add_argument_group('discretization')
    disc.add_argument('--nx', type=int, help='Mesh subdivisions per side')
    disc.add_argument('--degree', type=int, choices=[1, 2], help='Element degree')
    disc.add_argument('--dt', type=float, help='DNS time step')
    disc.add_argument('--stride', type=int, help='Keep every stride-th DNS step as a snapshot')
    disc.add_argument('--quad-refine', dest='quad_refine', type=int, help='Sub-triangles per side for load quadrature')

    pod = parser.add_argument_group('pod / rom')
    pod.add_argument('--inner-product', dest='inner_product', choices=[ip.value for ip in InnerProduct],
                     help='POD inner product')
    pod.add_argument('--rank-tol', dest='rank_tol', type=float, help='Relative eigenvalue cutoff')
    pod.add_argument('--states-only', dest='quotients', action='store_const', const=False,
                     help='Build the POD basis from the states without difference quotients')
    pod.add_argument('--r', type=int, help='Number of POD modes')
    pod.add_argument('--R', dest='R', type=int, help='Number of coarse modes (VMS-POD)')
    pod.add_argument('--alpha', help="Artificial viscosity, or 'auto' for alpha*")
    pod.add_argument('--model', choices=[kind.value for kind in ModelKind], help='Reduced model')

    parser.add_argument('--concurrency', type=int, help='Concurrent sweep cells')
    parser.add_argument('--seed', type=int, help='RNG seed recorded with the run')
    parser.add_argument('--verbose', '-v', action='store_true', help='Verbose logging')


def main(argv=None):
    """Main CLI entry point."""
    parser = argparse.ArgumentParser(
        prog='vmspod',
        description='POD-Galerkin and VMS-POD reduced-order models for 2D convection-diffusion',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Whole pipeline at desk scale
  vmspod run --output runs/desk

  # Step by step
  vmspod dns --output runs/desk
  vmspod pod --output runs/desk
  vmspod rom --output runs/desk --model pod-g
  vmspod rom --output runs/desk --model vms-pod --r 20 --R 10 --alpha auto

  # Error studies
  vmspod experiment table3 --output runs/desk
  vmspod experiment e3-regression --output runs/desk --concurrency 4

  # Reference resolution (very long)
  vmspod run --preset paper
        """
    )

    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')

    subparsers = parser.add_subparsers(dest='command', help='Command to run')

    dns_parser = subparsers.add_parser('dns', help='Run the full finite element simulation')
    _add_config_flags(dns_parser)

    pod_parser = subparsers.add_parser('pod', help='Build the POD basis from snapshots')
    _add_config_flags(pod_parser)

    rom_parser = subparsers.add_parser('rom', help='Run a reduced model')
    _add_config_flags(rom_parser)

    experiment_parser = subparsers.add_parser('experiment', help='Run an error study')
    experiment_parser.add_argument('name', choices=EXPERIMENT_NAMES, help='Experiment to run')
    _add_config_flags(experiment_parser)

    run_parser = subparsers.add_parser('run', help='Run dns, pod and both reduced models')
    _add_config_flags(run_parser)

    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        sys.exit(1)

    commands = {
        'dns': cmd_dns,
        'pod': cmd_pod,
        'rom': cmd_rom,
        'experiment': cmd_experiment,
        'run': cmd_run,
    }

    try:
        commands[args.command](args)
    except KeyboardInterrupt:
        print("\nInterrupted by user", file=sys.stderr)
        sys.exit(130)
    except Exception as e:
        logger = logging.getLogger('vmspod')
        logger.error(f"Fatal error: {e}")
        if args.verbose:
            raise
        sys.exit(1)


if __name__ == '__main__':
    main()
