import sys

from districtflow.cli import main

sys.exit(main())
