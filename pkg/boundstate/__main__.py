import sys

from boundstate.cli import main

sys.exit(main())
