"""Desk-scale target models with known geometry, plus labelled sample sets."""
import numpy as np

from .data import DatasetRecord
from .domain import DomainBounds
from .models import GbdtModel, LinearModel, MlpModel, RadialModel
from .oracle import Oracle

KINDS = ("radial", "linear", "three-class", "gbdt-corner", "mlp")


def radial(d=2, r2=0.4):
    return Oracle(RadialModel(r2, d))


def linear(d=2, b=0.5):
    w = np.zeros(d)
    w[0] = 1.0
    return Oracle(LinearModel(w, b))


def three_class(d=2):
    """Three 120-degree sectors in the first two coordinates (argmax of three linear scores)."""
    if d < 2:
        raise ValueError("three-class model needs d >= 2")
    w = np.zeros((3, d))
    for k in range(3):
        ang = 2.0 * np.pi * k / 3.0
        w[k, 0], w[k, 1] = np.cos(ang), np.sin(ang)
    return Oracle(MlpModel([(w, np.zeros(3), "identity")]))


def gbdt_corner(threshold=0.6):
    """Two stumps; class 1 only when both features exceed ``threshold``. Domain [0, 1]^2."""
    def stump(feat):
        return (0, [
            {"feat": feat, "thresh": threshold, "left": 1, "right": 2},
            {"leaf": -1.0},
            {"leaf": 0.5},
        ])

    return Oracle(GbdtModel([stump(0), stump(1)], k=1, dim=2), DomainBounds.box(2, 0.0, 1.0))


def random_mlp(d=2, hidden=16, k=3, seed=0):
    rng = np.random.default_rng(seed)
    layers = [
        (rng.normal(0, 1.0 / np.sqrt(d), (hidden, d)), rng.normal(0, 0.1, hidden), "relu"),
        (rng.normal(0, 1.0 / np.sqrt(hidden), (k, hidden)), np.zeros(k), "identity"),
    ]
    return Oracle(MlpModel(layers))


def build(kind, d=2, seed=0):
    if kind == "radial":
        return radial(d)
    if kind == "linear":
        return linear(d)
    if kind == "three-class":
        return three_class(d)
    if kind == "gbdt-corner":
        if d != 2:
            raise ValueError("gbdt-corner is two-dimensional")
        return gbdt_corner()
    if kind == "mlp":
        return random_mlp(d, seed=seed)
    raise ValueError(f"unknown model kind {kind!r}; choose from {', '.join(KINDS)}")


def sample_records(oracle, n, rng, low=-1.0, high=1.0, d=None):
    """Uniform points in a box, labelled by the (uncounted) oracle."""
    d = d or oracle.dim
    if oracle.bounds is not None and oracle.bounds.is_bounded:
        low, high = oracle.bounds.lower, oracle.bounds.upper
    clf = oracle.uncounted()
    pts = rng.uniform(low, high, size=(n, d))
    return [DatasetRecord(p, clf.classify(p)) for p in pts]
