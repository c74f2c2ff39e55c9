import sys

from scorer_bridge.cli import main

sys.exit(main())
