"""Entry point for ``python -m bayes_primer``."""
from .cli import main

raise SystemExit(main())
