"""Allow running fuzzyjudge as a module: python -m fuzzyjudge."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
