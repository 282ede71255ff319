import sys

from loanmix.cli import main

sys.exit(main())
