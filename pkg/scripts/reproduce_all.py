"""Run every shipped config plus logic verification across the eight reference rules.

Usage: python3 scripts/reproduce_all.py [--out results]
"""

import argparse
from pathlib import Path

from cmor.cli import run
from cmor.config import load_config
from cmor.eca import REFERENCE_RULES

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("results"))
    args = parser.parse_args()

    failures = 0
    base = load_config(CONFIGS / "logic_verify.cfg")
    for number in REFERENCE_RULES:
        failures += run(base.replace(rule=number), args.out / "logic_verify") != 0
    for path in sorted(CONFIGS.glob("*.cfg")):
        if path.stem != "logic_verify":
            failures += run(load_config(path), args.out / path.stem) != 0
    print(f"{failures} failing run(s)")
    return int(failures > 0)


if __name__ == "__main__":
    raise SystemExit(main())
