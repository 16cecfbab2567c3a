"""Allow ``python -m metriclab`` as an alias for the console script."""

import sys

from .cli import entrypoint

if __name__ == "__main__":
    sys.exit(entrypoint())
