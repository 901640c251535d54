import sys

from pmu_quality.cli import main

sys.exit(main())
