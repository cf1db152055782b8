import sys

from staffline.cli import main

sys.exit(main())
