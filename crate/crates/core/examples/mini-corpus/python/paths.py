from pathlib import Path
import shutil


def ensure_dir(p):
    Path(p).mkdir(parents=True, exist_ok=True)


def copy_tree(src, dst):
    shutil.copytree(src, dst, dirs_exist_ok=True)


def remove_tree(p):
    shutil.rmtree(p, ignore_errors=True)
