"""Pure-Python/numpy implementations of the query kernels.

Same signatures and semantics as the compiled ``_ckernels`` module. Used when
the extension is not built or ``OPTATTACK_PURE_PYTHON`` is set.
"""

import numpy as np

BACKEND = "python"

ACT_IDENTITY = 0
ACT_RELU = 1
ACT_TANH = 2


def ray_point(x0, theta, lam, lower, upper):
    return np.minimum(np.maximum(x0 + lam * theta, lower), upper)


def clip(x, lower, upper):
    return np.minimum(np.maximum(x, lower), upper)


def all_finite(x):
    return bool(np.isfinite(x).all())


def sq_norm(x):
    s = 0.0
    for v in x.tolist():
        s += v * v
    return s


def dot(a, b):
    s = 0.0
    for u, v in zip(a.tolist(), b.tolist()):
        s += u * v
    return s


def affine(weight, bias, x, act):
    out = weight @ x + bias
    if act == ACT_RELU:
        out = np.maximum(out, 0.0)
    elif act == ACT_TANH:
        out = np.tanh(out)
    return out


def gbdt_scores(feature, threshold, left, right, value, roots, tree_output, x, n_outputs):
    feat = feature.tolist()
    thr = threshold.tolist()
    lft = left.tolist()
    rgt = right.tolist()
    val = value.tolist()
    xs = x.tolist()
    out = [0.0] * n_outputs
    for root, k in zip(roots.tolist(), tree_output.tolist()):
        node = root
        while feat[node] >= 0:
            node = lft[node] if xs[feat[node]] <= thr[node] else rgt[node]
        out[k] += val[node]
    return np.asarray(out, dtype=np.float64)


