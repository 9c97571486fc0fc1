"""The hard-label oracle: the attack's only channel to the target model."""
import threading
from contextlib import contextmanager

from .domain import DomainBounds, as_vector
from .errors import ModelLoadError, QueryBudgetExceeded
from .models import model_from_dict, read_model_file


class Oracle:
    """Hard-label classifier with an exact, thread-safe query counter.

    ``classify`` returns only the predicted label. Callers are expected to
    clamp points into ``bounds`` before querying.
    """

    def __init__(self, model, bounds=None):
        self.model = model
        if bounds is not None and model.dim is not None and bounds.dim != model.dim:
            raise ValueError(f"bounds have dimension {bounds.dim}, model expects {model.dim}")
        self.bounds = bounds
        self._count = 0
        self._limit = None
        self._lock = threading.Lock()

    @property
    def dim(self):
        return self.model.dim

    @property
    def n_classes(self):
        return self.model.n_classes

    @property
    def query_count(self):
        return self._count

    def reset(self):
        with self._lock:
            self._count = 0

    def classify(self, x):
        x = as_vector(x, self.model.dim)
        with self._lock:
            if self._limit is not None and self._count >= self._limit:
                raise QueryBudgetExceeded(f"query budget of {self._limit} reached")
            self._count += 1
        return self.model.predict(x)

    def domain(self, dim):
        """Bounds for ``dim``-dimensional inputs (unbounded when none were given)."""
        if self.bounds is not None:
            return self.bounds
        return DomainBounds.unbounded(dim)

    def uncounted(self):
        """A handle on the same model whose queries never touch this counter."""
        return Oracle(self.model, self.bounds)

    @contextmanager
    def budget(self, n):
        """Refuse queries beyond ``n`` more calls while the block runs."""
        previous = self._limit
        self._limit = self._count + int(n)
        try:
            yield self
        finally:
            self._limit = previous


def query_count(oracle):
    return oracle.query_count


def classify(oracle, x):
    return oracle.classify(x)


def oracle_from_dict(spec, backend=None):
    model = model_from_dict(spec, backend=backend)
    bounds = None
    if spec.get("bounds") is not None:
        b = spec["bounds"]
        dim = model.dim
        if dim is None:
            raise ModelLoadError("bounds need a model with a fixed dimension (set d)", "bounds")
        try:
            bounds = DomainBounds.box(dim, b.get("lower"), b.get("upper"))
        except (ValueError, TypeError, AttributeError) as exc:
            raise ModelLoadError(str(exc), "bounds") from None
    return Oracle(model, bounds)


def load_model(path, fmt="json", backend=None):
    """Load a model file into a fresh oracle (query counter at 0).

    Only the JSON format is defined; ``fmt`` exists so other serializations
    can be added without changing callers.
    """
    if fmt not in ("json", None):
        raise ModelLoadError(f"unsupported model format {fmt!r}")
    return oracle_from_dict(read_model_file(path), backend=backend)
