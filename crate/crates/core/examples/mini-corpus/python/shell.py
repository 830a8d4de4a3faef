import subprocess
import shlex


def run_lines(cmd):
    out = subprocess.run(shlex.split(cmd), capture_output=True, text=True, check=True)
    return out.stdout.splitlines()


def quote_all(args):
    return " ".join(shlex.quote(a) for a in args)
