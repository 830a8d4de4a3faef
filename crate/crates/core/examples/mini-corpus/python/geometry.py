import numpy as np


def farthest(from_point, to_points):
    distances = np.linalg.norm(to_points - from_point, axis=1)
    index = np.argmax(distances)
    return to_points[index], index


def centroid(points):
    return np.mean(points, axis=0)
