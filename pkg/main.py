# Entry point: `python main.py <command> ...` runs the raftmin CLI
from raftmin.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
