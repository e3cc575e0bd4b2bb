import sys

from maxent_compat.cli import main

sys.exit(main())
