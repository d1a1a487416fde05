"""Run `lipkakeya probe-holder`.

usage: python3 scripts/run_probe_holder.py [config name or .cfg path] [out dir]
"""

from _run import run

if __name__ == "__main__":
    run("probe-holder", "results/probe_holder")
