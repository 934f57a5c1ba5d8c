import sys

from rdpptd.harness.cli import main

sys.exit(main())
