import sys
from pathlib import Path

# Make the shared synthetic-data helpers importable as `synth`.
sys.path.insert(0, str(Path(__file__).parent))
