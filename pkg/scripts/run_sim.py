#!/usr/bin/env python3
"""
ringberry launcher for a source checkout.

Runs the package CLI without installing it, e.g.

  python scripts/run_sim.py trap --config python/ringberry/data/example_tort.cfg
"""

import sys
from pathlib import Path

# Add the python directory to the path
sys.path.insert(0, str(Path(__file__).parent.parent / "python"))

from ringberry.cli import main  # noqa: E402


if __name__ == "__main__":
    sys.exit(main())
