import sys

from hiersearch.cli import main

sys.exit(main())
