"""Run `lipkakeya campaign`.

usage: python3 scripts/run_campaign.py [config name or .cfg path] [out dir]
"""

from _run import run

if __name__ == "__main__":
    run("campaign", "results/campaign")
