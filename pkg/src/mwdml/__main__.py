import sys

from mwdml.cli import main

sys.exit(main())
