"""Startup script for the federated simulator.

This script ensures proper Python path configuration.

    python run.py run --preset desk-synth-heterogeneous --strategy fedckd
    python run.py presets
"""

import sys
from pathlib import Path

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

# Now import and run the main application
from src.main import main

if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nExiting...")
        sys.exit(130)
