"""Serve the in-process engine over the stdio line protocol.

    python -m tapmt.serve [--mutant ID]
"""
import argparse
import sys

from .external import serve
from .harmonic import REFERENCE
from .mutants import with_mutant


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="python -m tapmt.serve", description=__doc__.splitlines()[0])
    parser.add_argument("--mutant", help="activate one seeded fault from the mutant catalog")
    args = parser.parse_args(argv)
    engine = with_mutant(args.mutant) if args.mutant else REFERENCE
    return serve(engine)


if __name__ == "__main__":
    sys.exit(main())
