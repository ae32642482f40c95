import sys

from vqm3d.cli import main

sys.exit(main())
