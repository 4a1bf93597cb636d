import sys

from fsr.cli import main

sys.exit(main())
