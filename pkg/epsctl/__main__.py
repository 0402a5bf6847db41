"""Allow running as: python -m epsctl"""

from .cli import main

raise SystemExit(main())
