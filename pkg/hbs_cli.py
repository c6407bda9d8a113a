#!/usr/bin/env python3
"""
Command-line front-end for hbs.
Usage: python hbs_cli.py run|classify|verify configs/pendulum_interior.yaml [--out DIR]
       python hbs_cli.py verify configs/ --out out     (batch: every *.yaml in the directory)
       python hbs_cli.py list-systems
"""

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path

from hbs import cli, utils
from hbs.models import Mode

logger = logging.getLogger(__name__)


def print_summary(path: Path, code: int, files: list):
    status = {cli.EXIT_OK: "✅ OK", cli.EXIT_SUITE_FAILED: "⚠️  SUITE FAILED"}.get(code, "❌ ERROR")
    print(f"{status}: {path}")
    for f in files:
        print(f"   💾 {f}")
        if f.suffix == ".json":
            report = json.loads(f.read_text(encoding="utf-8"))
            if report.get("termination"):
                print(f"   🏁 termination: {report['termination']}, events: {len(report['events'])}")
            for c in report.get("classifications", []):
                print(f"   🧭 {c['guard']}: {c['kind']} ({c['impact']})")
            failed = [c["name"] for c in report.get("checks", []) if not c["passed"]]
            if failed:
                print(f"   ❌ failed checks: {', '.join(failed)}")


async def main() -> int:
    parser = argparse.ArgumentParser(
        description="Simulate and verify hybrid mechanical systems with symmetry",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python hbs_cli.py run configs/free_particle_slab.yaml --out out
  python hbs_cli.py verify configs/pendulum_interior.yaml
  python hbs_cli.py classify configs/ --out out
  python hbs_cli.py list-systems
        """
    )
    parser.add_argument(
        'command',
        choices=[m.value for m in Mode] + ['list-systems'],
        help='What to do with the config(s)'
    )
    parser.add_argument(
        'config',
        nargs='?',
        help='Config file, or a directory of *.yaml configs to run as a batch'
    )
    parser.add_argument(
        '--out', '-o',
        default='out',
        help='Output directory; each config writes into <out>/<config name>/'
    )
    parser.add_argument(
        '--verbose', '-v',
        action='store_true',
        help='Enable verbose logging'
    )
    args = parser.parse_args()
    utils.configure_logging(args.verbose)

    if args.command == 'list-systems':
        for line in cli.describe_systems():
            print(f"🔧 {line}")
        return cli.EXIT_OK

    if not args.config:
        print("❌ Error: a config path is required.")
        return cli.EXIT_ERROR

    config_path = Path(args.config)
    if not config_path.exists():
        print(f"❌ Error: '{config_path}' not found.")
        return cli.EXIT_ERROR

    mode = Mode(args.command)
    out_dir = Path(args.out)
    print(f"🚀 {mode.value}: {config_path} -> {out_dir}")

    if config_path.is_dir():
        codes = await cli.execute_batch(config_path, out_dir, mode)
        if not codes:
            print(f"❌ Error: no *.yaml configs in '{config_path}'.")
            return cli.EXIT_ERROR
        for path, code in codes.items():
            print_summary(path, code, [])
        return cli.combined_exit_code(list(codes.values()))

    code, files = await cli.execute_path(config_path, out_dir, mode)
    print_summary(config_path, code, files)
    return code


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
