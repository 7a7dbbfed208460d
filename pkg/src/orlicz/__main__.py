import sys

from orlicz.cli import main

sys.exit(main())
