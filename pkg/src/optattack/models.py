"""Built-in hard-label target models and their JSON file format.

Every model exposes ``dim`` (None when any dimension is accepted),
``n_classes`` and ``predict(x) -> int``. Labels are zero-based.
"""
import json
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ModelLoadError


class RadialModel:
    """Class 1 outside the ball ``||x||^2 >= r2`` (boundary inclusive), else 0."""

    kind = "radial"
    n_classes = 2

    def __init__(self, r2=0.4, dim=None, backend=None):
        if not r2 > 0:
            raise ValueError("r2 must be positive")
        self.r2 = float(r2)
        self.dim = dim
        self._k = backend or kernels.active

    def predict(self, x):
        return 1 if self._k.sq_norm(x) >= self.r2 else 0

    def to_dict(self):
        out = {"type": self.kind, "r2": self.r2}
        if self.dim is not None:
            out["d"] = self.dim
        return out


class LinearModel:
    """Binary half-space model: class 1 iff ``w . x >= b``."""

    kind = "linear"
    n_classes = 2

    def __init__(self, w, b, backend=None):
        self.w = np.ascontiguousarray(w, dtype=np.float64)
        if self.w.ndim != 1 or self.w.size == 0:
            raise ValueError("w must be a non-empty vector")
        self.b = float(b)
        self.dim = self.w.shape[0]
        self._k = backend or kernels.active

    def predict(self, x):
        return 1 if self._k.dot(self.w, x) >= self.b else 0

    def to_dict(self):
        return {"type": self.kind, "w": self.w.tolist(), "b": self.b}


class MlpModel:
    """Dense feed-forward network; the label is the argmax of the last layer.

    ``layers`` is a sequence of ``(weight, bias, activation)`` with ``weight``
    of shape (out, in).
    """

    kind = "mlp"

    def __init__(self, layers, backend=None):
        if not layers:
            raise ValueError("an MLP needs at least one layer")
        self.layers = []
        width = None
        for i, (w, b, act) in enumerate(layers):
            w = np.ascontiguousarray(w, dtype=np.float64)
            b = np.ascontiguousarray(b, dtype=np.float64)
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: weight {w.shape} incompatible with bias {b.shape}")
            if width is not None and w.shape[1] != width:
                raise ValueError(f"layer {i}: expects {w.shape[1]} inputs, previous layer gives {width}")
            if act not in kernels.ACT_CODES:
                raise ValueError(f"layer {i}: unknown activation {act!r}")
            self.layers.append((w, b, act))
            width = w.shape[0]
        self._codes = [kernels.ACT_CODES[a] for _, _, a in self.layers]
        self.dim = self.layers[0][0].shape[1]
        self.n_classes = width
        self._k = backend or kernels.active

    def scores(self, x):
        h = x
        for (w, b, _), code in zip(self.layers, self._codes):
            h = self._k.affine(w, b, h, code)
        return h

    def predict(self, x):
        return int(np.argmax(self.scores(x)))

    def to_dict(self):
        return {
            "type": self.kind,
            "layers": [{"w": w.tolist(), "b": b.tolist(), "act": a} for w, b, a in self.layers],
        }


class GbdtModel:
    """Additive ensemble of axis-aligned trees.

    Each tree is ``(output, nodes)`` where nodes are dicts
    ``{"feat", "thresh", "left", "right"}`` or ``{"leaf"}`` indexed from the
    root at 0; ``x[feat] <= thresh`` goes left. With ``k == 1`` the ensemble
    is a binary classifier (label 1 iff the summed score is >= 0); otherwise
    the label is the argmax over ``k`` per-class score sums.
    """

    kind = "gbdt"

    def __init__(self, trees, k, dim=None, backend=None):
        k = int(k)
        if k < 1:
            raise ModelLoadError("k must be >= 1", "k")
        self.k = k
        self.n_outputs = 1 if k == 1 else k
        self.n_classes = 2 if k == 1 else k
        self.trees = [(int(out), [dict(n) for n in nodes]) for out, nodes in trees]
        if not self.trees:
            raise ModelLoadError("ensemble has no trees", "trees")
        self._flatten(dim)
        self._k = backend or kernels.active

    def _flatten(self, dim):
        feature, threshold, left, right, value, roots, outputs = [], [], [], [], [], [], []
        max_feat = -1
        for t, (out, nodes) in enumerate(self.trees):
            where = f"trees[{t}]"
            if not 0 <= out < self.n_outputs:
                raise ModelLoadError(f"class {out} outside [0, {self.n_outputs})", f"{where}.class")
            if not nodes:
                raise ModelLoadError("tree has no nodes", f"{where}.nodes")
            _check_tree(nodes, where)
            base = len(feature)
            roots.append(base)
            outputs.append(out)
            for node in nodes:
                if "leaf" in node:
                    feature.append(-1)
                    threshold.append(0.0)
                    left.append(-1)
                    right.append(-1)
                    value.append(float(node["leaf"]))
                else:
                    f = int(node["feat"])
                    max_feat = max(max_feat, f)
                    feature.append(f)
                    threshold.append(float(node["thresh"]))
                    left.append(base + int(node["left"]))
                    right.append(base + int(node["right"]))
                    value.append(0.0)
        if dim is None:
            dim = max_feat + 1 if max_feat >= 0 else 1
        if max_feat >= dim:
            raise ModelLoadError(f"feature index {max_feat} >= dimension {dim}", "trees")
        self.dim = int(dim)
        self._feature = np.asarray(feature, dtype=np.int64)
        self._threshold = np.asarray(threshold, dtype=np.float64)
        self._left = np.asarray(left, dtype=np.int64)
        self._right = np.asarray(right, dtype=np.int64)
        self._value = np.asarray(value, dtype=np.float64)
        self._roots = np.asarray(roots, dtype=np.int64)
        self._outputs = np.asarray(outputs, dtype=np.int64)

    def scores(self, x):
        return self._k.gbdt_scores(
            self._feature, self._threshold, self._left, self._right, self._value,
            self._roots, self._outputs, x, self.n_outputs,
        )

    def predict(self, x):
        s = self.scores(x)
        if self.k == 1:
            return 1 if s[0] >= 0.0 else 0
        return int(np.argmax(s))

    def to_dict(self):
        return {
            "type": self.kind,
            "k": self.k,
            "d": self.dim,
            "trees": [{"class": out, "nodes": nodes} for out, nodes in self.trees],
        }


def _check_tree(nodes, where):
    n = len(nodes)
    parent = [None] * n
    for i, node in enumerate(nodes):
        loc = f"{where}.nodes[{i}]"
        if not isinstance(node, dict):
            raise ModelLoadError("node must be an object", loc)
        if "leaf" in node:
            if not np.isfinite(float(node["leaf"])):
                raise ModelLoadError("leaf value must be finite", loc)
            continue
        missing = [key for key in ("feat", "thresh", "left", "right") if key not in node]
        if missing:
            raise ModelLoadError(f"internal node lacks {', '.join(missing)}", loc)
        if int(node["feat"]) < 0:
            raise ModelLoadError("negative feature index", loc)
        for side in ("left", "right"):
            c = node[side]
            if not isinstance(c, int) or not 0 <= c < n:
                raise ModelLoadError(f"{side} child {c!r} does not exist", loc)
            if c == 0 or parent[c] is not None:
                raise ModelLoadError(f"{side} child {c} already has a parent (cycle or DAG)", loc)
            parent[c] = i
    # every node must hang off the root, which also rules out cycles
    seen, stack = set(), [0]
    while stack:
        i = stack.pop()
        seen.add(i)
        if "leaf" not in nodes[i]:
            stack.extend((nodes[i]["left"], nodes[i]["right"]))
    unreachable = sorted(set(range(n)) - seen)
    if unreachable:
        raise ModelLoadError(f"nodes {unreachable} unreachable from root", where)


def _layer(spec, i):
    loc = f"layers[{i}]"
    try:
        w, b, act = spec["w"], spec["b"], spec.get("act", "identity")
    except (KeyError, TypeError) as exc:
        raise ModelLoadError(f"missing field {exc}", loc) from None
    if act not in kernels.ACT_CODES:
        raise ModelLoadError(f"unknown activation {act!r}", f"{loc}.act")
    try:
        w = np.asarray(w, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
    except (TypeError, ValueError):
        raise ModelLoadError("weights must be numeric (ragged matrix?)", loc) from None
    return w, b, act


def model_from_dict(spec, backend=None):
    """Build a model from its parsed JSON description."""
    if not isinstance(spec, dict):
        raise ModelLoadError("top level must be an object")
    kind = spec.get("type")
    try:
        if kind == "radial":
            return RadialModel(spec.get("r2", 0.4), spec.get("d"), backend=backend)
        if kind == "linear":
            if "w" not in spec or "b" not in spec:
                raise ModelLoadError("linear model needs w and b")
            model = LinearModel(spec["w"], spec["b"], backend=backend)
            if spec.get("d", model.dim) != model.dim:
                raise ModelLoadError(f"d={spec['d']} but w has {model.dim} entries", "d")
            return model
        if kind == "mlp":
            layers = spec.get("layers")
            if not isinstance(layers, list) or not layers:
                raise ModelLoadError("mlp needs a non-empty layers list", "layers")
            parsed = [_layer(s, i) for i, s in enumerate(layers)]
            try:
                model = MlpModel(parsed, backend=backend)
            except ValueError as exc:
                raise ModelLoadError(str(exc), "layers") from None
            if spec.get("d", model.dim) != model.dim:
                raise ModelLoadError(f"d={spec['d']} but first layer takes {model.dim}", "d")
            if "k" in spec and spec["k"] != model.n_classes:
                raise ModelLoadError(f"k={spec['k']} but last layer has {model.n_classes} outputs", "k")
            return model
        if kind == "gbdt":
            trees = spec.get("trees")
            if not isinstance(trees, list):
                raise ModelLoadError("gbdt needs a trees list", "trees")
            parsed = []
            for t, tree in enumerate(trees):
                if not isinstance(tree, dict) or not isinstance(tree.get("nodes"), list):
                    raise ModelLoadError("tree needs a nodes list", f"trees[{t}]")
                parsed.append((tree.get("class", 0), tree["nodes"]))
            return GbdtModel(parsed, spec.get("k", 1), spec.get("d"), backend=backend)
        if kind == "external":
            from .external import ExternalProcessModel

            return ExternalProcessModel(spec["command"], cwd=spec.get("cwd"))
    except ModelLoadError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelLoadError(f"invalid {kind} model: {exc}") from None
    raise ModelLoadError(f"unknown model type {kind!r}", "type")


def read_model_file(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelLoadError(f"cannot read model file: {exc}", str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"invalid JSON: {exc.msg}", f"{path}:{exc.lineno}:{exc.colno}") from None


def save_model(model, path, bounds=None):
    spec = model.to_dict()
    if bounds is not None:
        spec["bounds"] = bounds.to_dict()
    Path(path).write_text(json.dumps(spec, indent=1) + "\n")
