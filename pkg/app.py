"""
PanoGraph Launcher

Convenience wrapper that puts `src/` on the import path and hands the
command line to `panograph_app.cli`.

Usage:
    python app.py synth --seed 7 -o scene.scene.json
    python app.py bench --seed 7 -o metrics.csv --svg topdown.svg
"""

import os
import sys


def main() -> int:
    # Determine repo root (directory containing this file)
    repo_root = os.path.dirname(os.path.abspath(__file__))

    # Ensure the "src" directory is on sys.path so the panograph packages import
    src_dir = os.path.join(repo_root, "src")
    if src_dir not in sys.path:
        sys.path.insert(0, src_dir)

    from panograph_app.cli import main as cli_main

    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
