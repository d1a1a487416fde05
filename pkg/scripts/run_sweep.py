"""Run `lipkakeya sweep`.

usage: python3 scripts/run_sweep.py [config name or .cfg path] [out dir]
"""

from _run import run

if __name__ == "__main__":
    run("sweep", "results/sweep")
