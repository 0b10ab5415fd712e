"""Entry point for `python -m ness_dmrg`."""

import sys

from ness_dmrg.cli import main

if __name__ == "__main__":
    sys.exit(main())
