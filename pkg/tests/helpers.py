import os
import json
import numpy as np

from main import parse_instance


INSTANCES_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'instances')


def instance_path(name):
    return os.path.join(INSTANCES_DIR, f'{name}.json')


def load_fixture(name, **overrides):
    with open(instance_path(name)) as input_file:
        return parse_instance(json.load(input_file), name=name, **overrides)


def parallel(u, v):
    """Cosine of the angle between two vectors"""
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))


def trs_oracle(Q, g, n_boundary=20000, seed=0):
    """Independent TRS value: bisection on the secular equation plus dense boundary sampling

    Returns the smaller of both, so a solver is never compared against a worse bound.
    """
    Q = np.asarray(Q, dtype=float)
    g = np.asarray(g, dtype=float)
    lam, V = np.linalg.eigh(Q)
    g_hat = V.T @ g

    def norm(mu):
        return np.linalg.norm(g_hat / (lam + mu))

    low = max(0.0, -lam[0])
    candidates = []
    if lam[0] > 0 and norm(0.0) <= 1:
        w = -g_hat / lam
        candidates.append(w @ (lam * w) + 2 * g_hat @ w)
    else:
        high = low + np.linalg.norm(g_hat) + 1.0
        lo = low + 1e-15 * max(1.0, low)
        if np.abs(g_hat[0]) < 1e-12 and norm(lo) < 1:
            w = np.zeros_like(g_hat)
            w[1:] = -g_hat[1:] / (lam[1:] + low)
            w[0] = np.sqrt(max(0.0, 1 - w @ w))
        else:
            for _ in range(200):
                mid = (lo + high) / 2
                if norm(mid) > 1:
                    lo = mid
                else:
                    high = mid
            w = -g_hat / (lam + high)
        candidates.append(w @ (lam * w) + 2 * g_hat @ w)

    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((n_boundary, g.size))
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    values = np.einsum('ij,jk,ik->i', Y, Q, Y) + 2 * Y @ g
    candidates.append(float(values.min()))
    return float(min(candidates))


