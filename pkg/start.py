"""
Start the experiment harness, ``python start.py <command> [--config path] [--out path] [--seed n]``.
"""

if __name__ == "__main__":
    import sys

    from src.main import main

    sys.exit(main(sys.argv[1:]))
