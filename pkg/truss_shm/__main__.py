import sys

from truss_shm.cli import main

sys.exit(main())
