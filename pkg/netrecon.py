#!/usr/bin/env python3
"""
NetRecon - topology reconstruction for networks of dynamical systems with correlated noise.
Generates benchmark models, runs the penalty sweep of the skew-symmetric sparse + low-rank
split, plots the sweep traces and runs the property suites.
"""

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from rich import box
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import Progress, TimeElapsedColumn
from rich.table import Table

from config_support import RUN_CONFIG_SCHEMA, VERSION, RunConfig, build_config
from errors_support import NetReconError, RegionSelectionError, ValidationError
from generator_support import GeneratedModel, generate_model
from plot_support import plot_sweep
from reconstruct_support import PipelineSettings, ReconstructionReport, data_input, end_to_end
from serialization_support import (
    load_model, save_model, write_edges_csv, write_json, write_matrix_csv, write_report_json, write_spectral_json,
    write_sweep_csv,
)
from spectral_support import TimeSeries, simulate_ldim, simulate_noise_affine, simulate_noise_poly
from verify_support import SUITES, PropertyResult, run_suite, suite_size

logger = logging.getLogger('netrecon')

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
CONFIG_FIELDS = {f.name for f in fields(RunConfig)}


class NetRecon:
    """Main application class"""

    def __init__(self, console: Optional[Console] = None):
        self.version = VERSION
        self.console = console or Console()

    def print_banner(self, command: str):
        panel = Panel.fit(
            f"[bold green]Network topology from the imaginary IPSDM[/bold green]\n"
            f"[dim]command:[/dim] [bold]{command}[/bold]",
            title=f"[bold yellow]NetRecon v{self.version}[/bold yellow]",
            border_style="bold blue",
            box=box.ROUNDED,
        )
        self.console.print(panel)

    # === generate ===

    def generate(self, config: RunConfig) -> Path:
        self.print_banner('generate')
        self.console.print(f"🔧 Generating n={config.n}, q={config.q}, seed={config.seed}"
                           + (f", poly={config.poly}" if config.poly else ""))
        model = generate_model(config)
        path = Path(config.output) if config.output else Path(config.out_dir) / 'model.json'
        save_model(path, model, config.metadata())
        self._print_model_summary(model, path)
        return path

    def _print_model_summary(self, model: GeneratedModel, path: Path):
        d = model.diagnostics
        print("\n" + "=" * 60)
        print("📊 MODEL GENERATED")
        print("=" * 60)
        print(f"Nodes: {model.n}")
        print(f"Directed edges: {d.get('edges')}")
        print(f"Topology edges: {len(model.topology)}")
        print(f"Correlation edges: {len(model.correlation_graph)}")
        print(f"Latent groups: {d.get('q')}")
        print(f"Attempts: {model.attempts}")
        print(f"deg_max * inc: {d.get('sufficient_product', float('nan')):.3f}"
              f" ({'below' if d.get('sufficient') else 'not below'} 1/12)")
        print(f"\n📁 Model written to: {path}")

    # === pipeline ===

    def pipeline(self, config: RunConfig) -> ReconstructionReport:
        self.print_banner('pipeline')
        if not config.model:
            raise ValidationError("pipeline needs a model file (--model)")
        model = load_model(Path(config.model))
        omega = config.omega_value
        settings = PipelineSettings.from_run_config(config)
        truth = model.ground_truth(omega)
        out_dir = Path(config.out_dir)
        metadata = config.metadata()
        self.console.print(f"📁 Model: {config.model} (n={model.n})")
        self.console.print(f"🔍 {config.mode} path at omega={config.omega}*pi, eps={config.eps}")

        source: Any = model.expansion
        if config.mode == 'data':
            source = data_input(self._simulate(model, config), omega, settings)
            write_spectral_json(out_dir / 'spectrum.json', source.estimate, [omega], metadata)
            self.console.print(f"📈 Welch estimate over {source.estimate.segments} segments, "
                               f"bin omega={source.omega_used:.6f}")

        steps = int(round(1.0 / config.eps))
        with Progress("[progress.description]{task.description}", TimeElapsedColumn(),
                      "{task.completed}/{task.total}", console=self.console) as progress:
            task = progress.add_task("[cyan]Penalty sweep...", total=steps)
            try:
                report = end_to_end(source, omega, config.eps, settings, truth=truth,
                                    on_step=lambda t: progress.advance(task))
            except RegionSelectionError as exc:
                partial = exc.partial
                if isinstance(partial, ReconstructionReport) and partial.sweep is not None:
                    write_sweep_csv(out_dir / 'sweep.csv', partial.sweep, metadata)
                    write_report_json(out_dir / 'report.json', partial.to_dict(metadata))
                raise

        self._write_artifacts(report, out_dir, metadata)
        self._print_report_summary(report, out_dir)
        return report

    def _simulate(self, model: GeneratedModel, config: RunConfig) -> TimeSeries:
        length = config.samples + config.burn_in
        self.console.print(f"🎲 Simulating {config.samples:,} samples (burn-in {config.burn_in})")
        if model.poly is not None:
            noise = simulate_noise_poly(model.poly, model.expansion.base, length, config.seed)
        else:
            noise = simulate_noise_affine(model.expansion, length, config.seed)
        return simulate_ldim(model.ldim, noise, config.burn_in)

    def _write_artifacts(self, report: ReconstructionReport, out_dir: Path, metadata: Dict[str, Any]):
        record = report.sweep.records[report.selection.index]
        write_sweep_csv(out_dir / 'sweep.csv', report.sweep, metadata)
        write_matrix_csv(out_dir / 'S_t0.csv', record.s, metadata)
        write_matrix_csv(out_dir / 'L_t0.csv', record.l, metadata)
        write_edges_csv(out_dir / 'topology.csv', report.topology, metadata)
        write_edges_csv(out_dir / 'correlation.csv', report.correlation_graph, metadata)
        write_report_json(out_dir / 'report.json', report.to_dict(metadata))

    def _print_report_summary(self, report: ReconstructionReport, out_dir: Path):
        print("\n" + "=" * 60)
        print("📊 RECONSTRUCTION COMPLETE")
        print("=" * 60)
        print(f"Source: {report.source}")
        print(f"omega used: {report.omega_used:.6f}")
        print(f"Zero regions: {len(report.regions)}")
        print(f"t0: {report.t0:.2f}")
        print(f"Topology edges: {len(report.topology)}")
        if report.metrics is not None:
            m = report.metrics
            print(f"Decomposition: {m.false_positives} false positives, {m.false_negatives} missed"
                  f" (error {m.total_error_fraction:.1%})")
        if report.direct_metrics is not None:
            d = report.direct_metrics
            print(f"Direct thresholding: {d.false_positives} false positives, {d.false_negatives} missed"
                  f" (error {d.total_error_fraction:.1%})")
        if report.correlation_metrics is not None:
            print(f"Correlation graph exact: {report.correlation_metrics.exact}")
        for flag in report.flags:
            print(f"  ⚠ {flag}")

        print("\n📁 Generated files:")
        for filename in ['sweep.csv', 'S_t0.csv', 'L_t0.csv', 'topology.csv', 'correlation.csv', 'report.json',
                         'spectrum.json']:
            if filename == 'spectrum.json' and report.source != 'data':
                continue
            file_path = out_dir / filename
            if file_path.exists():
                print(f"  ✓ {filename} ({file_path.stat().st_size:,} bytes)")
            else:
                print(f"  ⚠ {filename} (not generated)")
        print(f"\n🎉 All files saved to: {out_dir}")

    # === plot ===

    def plot(self, csv_path: str, output: Optional[str], title: Optional[str] = None) -> Path:
        svg_path = Path(output) if output else Path(csv_path).with_suffix('.svg')
        plot_sweep(Path(csv_path), svg_path, title)
        print(f"✓ Plot written to: {svg_path}")
        return svg_path

    # === verify ===

    def verify(self, suite: str, config: RunConfig) -> List[PropertyResult]:
        self.print_banner(f'verify {suite}')
        with Progress("[progress.description]{task.description}", TimeElapsedColumn(),
                      "{task.completed}/{task.total}", console=self.console) as progress:
            task = None
            if suite in SUITES:
                task = progress.add_task(f"[magenta]Suite {suite}...", total=suite_size(suite, config))
            results = run_suite(suite, config, tick=lambda: task is not None and progress.advance(task))

        table = Table(title=f"Suite: {suite}", box=box.SIMPLE_HEAVY)
        table.add_column("Property")
        table.add_column("Result", justify="center")
        table.add_column("Detail")
        for result in results:
            table.add_row(result.name, "[green]✓ pass[/green]" if result.passed else "[red]❌ fail[/red]",
                          result.detail)
        self.console.print(table)

        passed = sum(r.passed for r in results)
        write_json(Path(config.out_dir) / f'verify-{suite}.json',
                   {'metadata': config.metadata(), 'suite': suite, 'passed': passed, 'total': len(results),
                    'results': [r.to_dict() for r in results]})
        self.console.print(f"{'🎉' if passed == len(results) else '❌'} {passed}/{len(results)} properties hold")
        return results


def print_help():
    print("\033[1;36m\nWelcome to NetRecon!\033[0m")
    print("\033[1;33mTopology reconstruction from the imaginary inverse power spectral density\033[0m\n")
    print("Usage:")
    print("  python netrecon.py <command> [options]\n")
    print("Available commands:")
    print("  generate                 Generate a seeded benchmark model (model.json)")
    print("  pipeline --model <file>  Sweep, pick the middle zero region, reconstruct and report")
    print("  plot <sweep.csv>         Draw diff_t / tol_t against t as SVG")
    print("  verify <suite>           Run a property suite: equivalence, structure, blockdiag,")
    print("                           identity, pigeonhole, recovery, negative")
    print("  schema                   Print the configuration schema")
    print("  help                     Show this help message\n")
    print("Common options:")
    print("  --config <file>          YAML or TOML configuration file")
    print("  --seed <int>             Random seed")
    print("  --out-dir <dir>          Output directory for generated files")
    print("  --threads <int>          Worker threads for the sweep and the Welch estimate")
    print("  --verbose, -v            Enable debug logging\n")
    print("Examples:")
    print("  python netrecon.py generate --n 29 --q 3 --seed 7 --separated-latents")
    print("  python netrecon.py pipeline --model netrecon-output/model.json --omega 3/8 --eps 0.01")
    print("  python netrecon.py pipeline --model model.json --data --samples 1000000 --omega 2/5")
    print("  python netrecon.py plot netrecon-output/sweep.csv")
    print("  python netrecon.py verify blockdiag\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="NetRecon - topology reconstruction of networks with correlated noise",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python netrecon.py generate --n 29 --q 3 --seed 7
  python netrecon.py pipeline --model netrecon-output/model.json --analytic
  python netrecon.py plot netrecon-output/sweep.csv --output sweep.svg
  python netrecon.py verify equivalence --seeds 20
        """
    )
    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='YAML or TOML configuration file')
    common.add_argument('--seed', type=int, help='Random seed')
    common.add_argument('--out-dir', dest='out_dir', help='Output directory for generated files')
    common.add_argument('--threads', type=int, help='Worker threads')
    common.add_argument('--verbose', '-v', action='store_true', help='Verbose output')

    model_flags = argparse.ArgumentParser(add_help=False)
    model_flags.add_argument('--n', type=int, help='Number of observed nodes')
    model_flags.add_argument('--q', type=int, help='Number of correlated noise cliques')
    model_flags.add_argument('--edges', type=int, help='Number of directed edges')
    model_flags.add_argument('--separated-latents', action='store_true', default=None,
                             help='Keep latent neighbourhoods disjoint')
    model_flags.add_argument('--poly', choices=['parity', 'listed'], help='Polynomial correlation preset')
    model_flags.add_argument('--require-sufficient', dest='require_sufficient_condition', action='store_true',
                             default=None, help='Only accept models with deg_max * inc < 1/12')
    model_flags.add_argument('--no-recovery-check', dest='require_recovery', action='store_false', default=None,
                             help='Accept benchmark models without checking that the analytic sweep recovers them')
    model_flags.add_argument('--max-retries', dest='max_retries', type=int, help='Generation attempts')

    generate_parser = subparsers.add_parser('generate', parents=[common, model_flags],
                                            help='Generate a seeded benchmark model')
    generate_parser.add_argument('--omega', help='Check frequency as a multiple of pi, e.g. 3/8')
    generate_parser.add_argument('--output', '-o', help='Model file path (default <out-dir>/model.json)')

    pipeline_parser = subparsers.add_parser('pipeline', parents=[common], help='Run the reconstruction pipeline')
    pipeline_parser.add_argument('--model', help='Model JSON file')
    pipeline_parser.add_argument('--omega', help='Frequency as a multiple of pi, e.g. 3/8')
    pipeline_parser.add_argument('--eps', type=float, help='Penalty grid spacing')
    mode = pipeline_parser.add_mutually_exclusive_group()
    mode.add_argument('--analytic', dest='mode', action='store_const', const='analytic', help='Exact IPSDM')
    mode.add_argument('--data', dest='mode', action='store_const', const='data', help='Simulate and estimate')
    pipeline_parser.add_argument('--samples', type=int, help='Samples for the data path')
    pipeline_parser.add_argument('--segment', dest='segment_length', type=int, help='Welch segment length')
    pipeline_parser.add_argument('--tau-edge', dest='tau_edge', type=float, help='Relative edge threshold')
    pipeline_parser.add_argument('--tau-zero', dest='tau_zero', type=float, help='Relative zero-region threshold')

    plot_parser = subparsers.add_parser('plot', help='Plot a sweep CSV as SVG')
    plot_parser.add_argument('csv', help='Sweep CSV written by the pipeline')
    plot_parser.add_argument('--output', '-o', help='SVG path (default: CSV path with .svg)')
    plot_parser.add_argument('--title', help='Figure title')
    plot_parser.add_argument('--verbose', '-v', action='store_true', help='Verbose output')

    verify_parser = subparsers.add_parser('verify', parents=[common, model_flags], help='Run a property suite')
    verify_parser.add_argument('suite', help='Suite name')
    verify_parser.add_argument('--seeds', type=int, help='Number of seeds per suite')
    verify_parser.add_argument('--omega', help='Frequency as a multiple of pi')
    verify_parser.add_argument('--eps', type=float, help='Penalty grid spacing')

    subparsers.add_parser('schema', help='Print the configuration schema')
    subparsers.add_parser('help', help='Show help and usage instructions')
    return parser


def setup_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {k: v for k, v in vars(args).items() if k in CONFIG_FIELDS and v is not None}
    return build_config(getattr(args, 'config', None), **overrides)


def report_error(exc: NetReconError, out_dir: Optional[str]):
    payload = exc.to_dict()
    print(json.dumps(payload, indent=2, ensure_ascii=False), file=sys.stderr)
    if out_dir:
        try:
            write_json(Path(out_dir) / 'error.json', payload)
        except OSError as os_exc:
            logger.warning("could not write error.json: %s", os_exc)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns 0 on success, 2 on validation errors, 3 on numerical failures"""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(getattr(args, 'verbose', False))
    app = NetRecon()
    out_dir = getattr(args, 'out_dir', None)

    try:
        if args.command == 'generate':
            config = config_from_args(args)
            out_dir = config.out_dir
            app.generate(config)
        elif args.command == 'pipeline':
            config = config_from_args(args)
            out_dir = config.out_dir
            app.pipeline(config)
        elif args.command == 'plot':
            app.plot(args.csv, args.output, args.title)
        elif args.command == 'verify':
            config = config_from_args(args)
            out_dir = config.out_dir
            results = app.verify(args.suite, config)
            if not all(r.passed for r in results):
                return EXIT_VERIFY_FAILED
        elif args.command == 'schema':
            print(json.dumps(RUN_CONFIG_SCHEMA, indent=2, ensure_ascii=False))
        elif args.command == 'help' or args.command is None:
            print_help()
        else:
            parser.print_help()
    except NetReconError as exc:
        report_error(exc, out_dir)
        return exc.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
