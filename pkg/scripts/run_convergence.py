#!/usr/bin/env python3
"""Run the default convergence study; thin wrapper over the package CLI.

Examples:
    python scripts/run_convergence.py
    python scripts/run_convergence.py --levels 2:4 --csv results.csv --vtk last.vtk
"""

import sys

from dpgtransport.cli import main

if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
