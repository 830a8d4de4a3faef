import torch
import torch.nn.functional as F


def normalize(x):
    return F.normalize(x, p=2, dim=1)


def similarity(a, b):
    return torch.matmul(normalize(a), normalize(b).T)


def zeros_like_batch(x):
    return torch.zeros(x.shape[0], 1)
