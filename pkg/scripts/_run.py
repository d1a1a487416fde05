"""Shared helper: run one subcommand with a config from scripts/configs."""

import sys
from pathlib import Path

from lipkakeya import cli

CONFIGS = Path(__file__).resolve().parent / "configs"


def run(command, default_out, extra=()):
    cfg = sys.argv[1] if len(sys.argv) > 1 else "default"
    out = sys.argv[2] if len(sys.argv) > 2 else f"{default_out}-{cfg}"
    path = Path(cfg) if cfg.endswith(".cfg") else CONFIGS / f"{cfg}.cfg"
    sys.exit(cli.main([command, "--config", str(path), "--out", out, *extra]))
