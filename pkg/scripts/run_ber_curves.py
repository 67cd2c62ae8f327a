#!/usr/bin/env python3
"""Run the headline uncoded BER experiments and print a compact summary.

Runs the Nyquist sanity curve plus the two FTN operating points and
leaves the full CSV artifacts under out/.  Pass --quick for a fast,
low-precision smoke run.
"""

import argparse
import subprocess
import sys
from pathlib import Path

CONFIGS = ["ber_nyquist.yaml", "ber_tau08.yaml", "ber_tau07.yaml"]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true",
                        help="cap every point at 2000 blocks")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    root = Path(__file__).resolve().parent.parent
    for name in CONFIGS:
        config = root / "configs" / name
        if args.quick:
            import yaml

            data = yaml.safe_load(config.read_text())
            data["channel"]["max_blocks"] = 2000
            data["channel"]["min_errors"] = 50
            config = root / "out" / f"quick_{name}"
            config.parent.mkdir(exist_ok=True)
            config.write_text(yaml.safe_dump(data))
        cmd = [sys.executable, "-m", "ftnlab", "ber", "--config", str(config),
               "--workers", str(args.workers)]
        print(f"== {name} ==", flush=True)
        result = subprocess.run(cmd)
        if result.returncode:
            return result.returncode

    for sub in ("ber_nyquist", "ber_tau08", "ber_tau07"):
        csv = root / "out" / sub / "ber.csv"
        if csv.exists():
            print(f"\n--- {csv} ---")
            print(csv.read_text().strip())
    return 0


if __name__ == "__main__":
    sys.exit(main())
