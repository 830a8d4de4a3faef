import yaml
import os.path


def load_config(path):
    with open(path) as fh:
        return yaml.safe_load(fh)


def config_path(base, name):
    return os.path.join(base, name + ".yaml")


def dump_config(cfg, path):
    with open(path, "w") as fh:
        yaml.safe_dump(cfg, fh, default_flow_style=False)
