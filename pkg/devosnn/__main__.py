"""Allow running devosnn as ``python -m devosnn``."""

import sys

from devosnn.cli import main

sys.exit(main())
