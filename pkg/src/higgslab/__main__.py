"""Allow ``python -m higgslab``."""
import sys

from .cli import main

sys.exit(main())
