#!/usr/bin/env python
import argparse
import sys
import unittest

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Run the test suite of a package")
    parser.add_argument("package", nargs="?", default="boundstate")
    parser.add_argument("-v", "--verbosity", type=int, default=1)
    args = parser.parse_args()

    suite = unittest.defaultTestLoader.discover(args.package, top_level_dir=".")
    result = unittest.TextTestRunner(verbosity=args.verbosity).run(suite)
    sys.exit(0 if result.wasSuccessful() else 1)
