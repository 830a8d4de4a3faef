import json
import pickle
import gzip


def save_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)


def load_pickle(path):
    with gzip.open(path, "rb") as fh:
        return pickle.load(fh)
