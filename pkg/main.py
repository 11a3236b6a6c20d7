#!/usr/bin/env python3
"""
Entry point for the bilanz command line
Usage: python main.py run --input statements/ --out out/
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "backend"))

from app.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
