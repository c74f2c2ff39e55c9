import sys

from mpmcts.cli import main

sys.exit(main())
