#!/usr/bin/env python3
"""
TRUST - Startup Script

Checks that the required packages are importable, then hands the command
line to ``src.cli.main``.
"""
import sys
from pathlib import Path

REQUIRED_PACKAGES = {
    "numpy": "numpy",
    "scipy": "scipy",
    "pandas": "pandas",
    "matplotlib": "matplotlib",
    "pydantic": "pydantic",
    "python-dotenv": "dotenv",
    "openai": "openai",
    "httpx": "httpx",
    "backoff": "backoff",
}


def check_dependencies() -> bool:
    """Check if all required dependencies are installed."""
    missing_packages = []
    for package, module in REQUIRED_PACKAGES.items():
        try:
            __import__(module)
        except ImportError:
            missing_packages.append(package)

    if missing_packages:
        print(f"❌ Missing packages: {', '.join(missing_packages)}", file=sys.stderr)
        print("Please install them using: pip install -r requirements.txt", file=sys.stderr)
        return False
    return True


def main():
    sys.path.insert(0, str(Path(__file__).parent))
    if not check_dependencies():
        sys.exit(1)

    from src.cli import main as cli_main

    try:
        sys.exit(cli_main(sys.argv[1:]))
    except KeyboardInterrupt:
        print("\n👋 Stopped by user", file=sys.stderr)
        sys.exit(130)


if __name__ == "__main__":
    main()
