import sys

from castore.cli import main

sys.exit(main())
