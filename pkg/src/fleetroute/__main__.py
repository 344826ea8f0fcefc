import sys

from fleetroute.cli import main

sys.exit(main())
