"""Allow ``python -m crutchgait``."""

import sys

from crutchgait.services.cli import main


sys.exit(main())
