import sys

from cmor.cli import main

sys.exit(main())
