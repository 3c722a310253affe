# This file marks the raftmin directory as a Python package
