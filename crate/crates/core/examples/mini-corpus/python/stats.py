import statistics
import random


def summary(values):
    return statistics.mean(values), statistics.stdev(values)


def bootstrap(values, n, seed):
    rng = random.Random(seed)
    return [statistics.median(rng.choices(values, k=len(values))) for _ in range(n)]
