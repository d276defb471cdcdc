import sys

from qpbell.cli import main

sys.exit(main())
