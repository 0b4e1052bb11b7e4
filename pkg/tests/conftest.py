import sys
from pathlib import Path

# Allow running the suite from a fresh checkout without installing.
_SRC = Path(__file__).resolve().parent.parent / "src"
if str(_SRC) not in sys.path:
    sys.path.insert(0, str(_SRC))
