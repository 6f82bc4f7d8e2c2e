import sys

from jscmd.cli import main

sys.exit(main())
