import sys

from decregions.cli import main

sys.exit(main())
