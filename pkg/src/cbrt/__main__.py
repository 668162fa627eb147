import sys

from cbrt.cli import main

sys.exit(main())
