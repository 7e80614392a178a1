import sys

from hcb.cli import main

sys.exit(main())
