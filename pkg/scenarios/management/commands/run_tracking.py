import logging

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from scenarios.manifest import ManifestError, parse_config
from scenarios.runner import run_batch
from scenarios.writers import write_results

QUIET_LOGGERS = ('core', 'scenarios')


class Command(BaseCommand):
    help = 'Runs beam tracking scenarios from a TOML manifest and writes throughput traces as CSV.'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='TOML manifest; all defaults when omitted.')
        parser.add_argument('--out', help='Output directory (overrides the manifest).')
        parser.add_argument('--seed', type=int, help='First seed (overrides the manifest).')
        parser.add_argument('--method', choices=['beampattern', 'codebook', 'perturbation', 'all'])
        parser.add_argument('--speed', type=float, action='append', help='Angular speed in deg/s; repeatable.')
        parser.add_argument('--workers', type=int, default=None, help='Scenario processes to run in parallel.')
        parser.add_argument('--quiet', action='store_true', help='Only report warnings and errors.')

    def say(self, message, style):
        if not self.quiet:
            self.stdout.write(style(message))

    def handle(self, *args, **options):
        self.quiet = options['quiet']
        if not self.quiet:
            return self.run_manifest(options)
        loggers = [logging.getLogger(name) for name in QUIET_LOGGERS]
        levels = [logger.level for logger in loggers]
        for logger in loggers:
            logger.setLevel(max(logger.getEffectiveLevel(), logging.WARNING))
        try:
            return self.run_manifest(options)
        finally:
            for logger, level in zip(loggers, levels):
                logger.setLevel(level)

    def run_manifest(self, options):
        overrides = {
            'seed': options['seed'],
            'method': options['method'],
            'angular_speed_deg_s': options['speed'],
            'output_dir': options['out'],
        }

        # 1. Manifest
        try:
            manifest = parse_config(options['config'], overrides)
        except ManifestError as e:
            raise CommandError(f'Invalid manifest: {e}') from e
        self.say(f'Loaded {len(manifest.scenarios)} scenarios.', self.style.NOTICE)

        # 2. Simulation
        workers = options['workers'] or settings.BEAMTRACK_WORKERS
        results = run_batch(manifest.scenarios, workers=workers)
        failures = [r for r in results if not r.ok]
        for result in failures:
            method, speed, seed = result.config.key
            self.stderr.write(self.style.ERROR(f'Scenario {method} at {speed:g} deg/s, seed {seed} failed: {result.error}'))

        # 3. Output
        try:
            written = write_results(manifest.output_dir, results, manifest.emit_per_seed)
        except OSError as e:
            raise CommandError(f'Error writing results to {manifest.output_dir}: {e}') from e
        self.say(f'Wrote {len(written)} files to {manifest.output_dir}.', self.style.SUCCESS)

        for result in results:
            if result.ok:
                s = result.summary
                self.say(
                    f'{s.method:>12} {s.speed_deg_s:>6g} deg/s seed {s.seed}: '
                    f'mean post-update {s.mean_post_update_tput:.3f} of {s.upper_bound:.3f} bits/s/Hz, '
                    f'{s.trainings_used} trainings',
                    self.style.SUCCESS,
                )

        if failures:
            raise CommandError(f'{len(failures)} of {len(results)} scenarios failed; first: {failures[0].error}')
