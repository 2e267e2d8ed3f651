"""Allow `python -m l2x`."""

import sys

from .cli import main

sys.exit(main())
