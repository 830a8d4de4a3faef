import argparse
import sys


def parse(argv):
    parser = argparse.ArgumentParser(prog="tool")
    parser.add_argument("--count", type=int, default=1)
    return parser.parse_args(argv)


def main():
    args = parse(sys.argv[1:])
    sys.exit(0 if args.count > 0 else 1)
