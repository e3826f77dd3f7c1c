import sys

from fastcmh.cli import main

sys.exit(main())
