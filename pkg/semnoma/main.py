"""
Command-line entry point for semnoma.
Handles process configuration, logging setup and command dispatch.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from semnoma import __version__
from semnoma.cli.commands import (
    EXIT_CONFIG,
    EXIT_IO,
    cmd_figure,
    cmd_oracle_check,
    cmd_region,
    cmd_solve,
)
from semnoma.cli.models import ConfigError, load_run_config
from semnoma.core.experiments import SchemeId
from semnoma.core.link_model import ModePolicy, PowerPolicy, TimePolicy

load_dotenv()

# Configure logging
logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)


def _int_env(name: str) -> Optional[int]:
    value = os.getenv(name)
    if value is None or value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"Environment variable {name} must be an integer", key=name)


class Config:
    """Process settings loaded from environment variables; command-line flags take precedence."""

    def __init__(self) -> None:
        self.LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
        self.CONFIG_PATH: Optional[str] = os.getenv("SEMNOMA_CONFIG") or None
        self.OUT_DIR: str = os.getenv("SEMNOMA_OUT", "out")
        self.SEED: Optional[int] = _int_env("SEMNOMA_SEED")
        self.STATES: Optional[int] = _int_env("SEMNOMA_STATES")
        self.THREADS: int = _int_env("SEMNOMA_THREADS") or 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration (or a manifest.yaml)")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--seed", type=int, help="Fading-state seed")
    common.add_argument("--states", type=int, help="Number of fading states")
    common.add_argument("--threads", type=int, help="Worker threads for figure sweeps")

    parser = argparse.ArgumentParser(
        prog="semnoma",
        description="Semantic-versus-bit rate regions and ergodic resource management for two-user uplink NOMA",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("region", parents=[common], help="Static-channel rate-region boundaries")

    solve = sub.add_parser("solve", parents=[common], help="Solve one scenario on sampled fading states")
    solve.add_argument("scenario", choices=["s1", "s2"])
    solve.add_argument("--mode", choices=[m.value for m in ModePolicy], default=ModePolicy.OPPORTUNISTIC.value)
    solve.add_argument("--power", choices=[p.value for p in PowerPolicy])
    solve.add_argument("--time", choices=[t.value for t in TimePolicy])

    figure = sub.add_parser("figure", parents=[common], help="Figure sweep data plus manifest")
    figure.add_argument("fig_id", help="fig2, fig5, fig6, fig7, fig8, pavg, fig9 or a long name")

    sub.add_parser("oracle-check", parents=[common], help="Certify the continuous solver on a small instance")
    return parser


def _scheme(args: argparse.Namespace) -> SchemeId:
    # constant-power management is on-off in both power and time
    default = "on_off" if args.scenario == "s1" else "continuous"
    return SchemeId(
        mode_policy=ModePolicy(args.mode),
        power_policy=PowerPolicy(args.power or default),
        time_policy=TimePolicy(args.time or default),
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        env = Config()
        cfg = load_run_config(args.config or env.CONFIG_PATH)
        cfg = cfg.with_overrides(
            seed=args.seed if args.seed is not None else env.SEED,
            state_count=args.states if args.states is not None else env.STATES,
        )
    except ConfigError as e:
        logger.error(f"Configuration error at '{e.key}': {e.message}")
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"Cannot read configuration: {str(e)}")
        return EXIT_IO

    out_dir = Path(args.out or env.OUT_DIR)
    threads = args.threads if args.threads is not None else env.THREADS
    logger.info(f"semnoma {__version__}: {args.command} -> {out_dir}")

    if args.command == "region":
        return cmd_region(cfg, out_dir)
    if args.command == "solve":
        return cmd_solve(cfg, out_dir, args.scenario, _scheme(args))
    if args.command == "figure":
        return cmd_figure(cfg, out_dir, args.fig_id, threads)
    return cmd_oracle_check(cfg, out_dir)


if __name__ == "__main__":
    sys.exit(main())
