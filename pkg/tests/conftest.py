import sys
from pathlib import Path

# allow `import oracles` / `import synth` from the tests directory
sys.path.insert(0, str(Path(__file__).parent))
