import sys

from sfakit.input_output.cli import main

sys.exit(main())
