import sys

from hamring.cli import main

sys.exit(main())
