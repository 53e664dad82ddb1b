import sys

from psphere.cli.main import main

sys.exit(main())
