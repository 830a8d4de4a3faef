import re
import textwrap


def squash(s):
    return re.sub(r"\s+", " ", s).strip()


def words(s):
    return re.findall(r"[A-Za-z]+", s)


def wrap(s, width):
    return textwrap.fill(s, width=width)
