import sys

from mappergw.cli import main

sys.exit(main())
