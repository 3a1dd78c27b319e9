import sys

from fedsel.cli import main

sys.exit(main())
