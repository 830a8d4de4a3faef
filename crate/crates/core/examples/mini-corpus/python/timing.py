import time
from datetime import datetime, timedelta


def deadline(seconds):
    return datetime.now() + timedelta(seconds=seconds)


def wait_until(ts):
    while datetime.now() < ts:
        time.sleep(0.05)


def stamp():
    return datetime.utcnow().strftime("%Y-%m-%dT%H:%M:%SZ")
