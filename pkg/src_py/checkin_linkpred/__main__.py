import sys

from checkin_linkpred.cli import main

sys.exit(main())
