"""Instance files, the bundled corpus and seeded random instances.

An instance file is a JSON object::

    {"name": "circle", "n": 2,
     "Q": [[1, 0], [0, 1]], "alpha": [0, 0], "g": 1,
     "A": [[1, 0], [-1, 0], [0, 1], [0, -1]], "b": [1, 1, 1, 1],
     "tolerances": {"member_tol": 1e-6}}

``Q`` is symmetrized on load; ``tolerances`` (optional) overrides fields of
:class:`~quadhull.config.Config` for this instance.
"""

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .config import DEFAULT
from .errors import InvalidInputError
from .polytope import HPolytope
from .reduction import QuadInstance

_REQUIRED = ("n", "Q", "alpha", "g", "A", "b")


def instance_from_dict(doc, validate=True):
    """Build ``(instance, config)`` from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise InvalidInputError("instance document must be a JSON object")
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise InvalidInputError(f"instance is missing keys: {', '.join(missing)}")
    unknown = set(doc) - set(_REQUIRED) - {"name", "tolerances", "comment"}
    if unknown:
        raise InvalidInputError(f"unknown instance keys: {', '.join(sorted(unknown))}")
    try:
        n = int(doc["n"])
        Q = np.asarray(doc["Q"], dtype=float).reshape(n, n)
        alpha = np.asarray(doc["alpha"], dtype=float).reshape(n)
        A = np.asarray(doc["A"], dtype=float)
        b = np.asarray(doc["b"], dtype=float).reshape(-1)
        A = A.reshape(b.shape[0], n)
        g = float(doc["g"])
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed instance data: {exc}") from None
    config = DEFAULT.with_overrides(doc.get("tolerances") or {})
    inst = QuadInstance(Q, alpha, g, HPolytope(A, b), str(doc.get("name", "")))
    if validate:
        inst.validate(config)
    return inst, config


def instance_to_dict(inst, tolerances=None):
    doc = {
        "name": inst.name,
        "n": inst.n,
        "Q": inst.Q.tolist(),
        "alpha": inst.alpha.tolist(),
        "g": inst.g,
        "A": inst.P.A.tolist(),
        "b": inst.P.b.tolist(),
    }
    if tolerances:
        doc["tolerances"] = dict(tolerances)
    return doc


def load_instance(path, validate=True):
    """Read an instance file; returns ``(QuadInstance, Config)``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    inst, config = instance_from_dict(doc, validate)
    if not inst.name:
        inst = QuadInstance(inst.Q, inst.alpha, inst.g, inst.P, Path(path).stem)
    return inst, config


def dumps_instance(inst, tolerances=None):
    """JSON text with one matrix row per line."""
    doc = instance_to_dict(inst, tolerances)
    lines = []
    for key, value in doc.items():
        if isinstance(value, list) and value and isinstance(value[0], list):
            rows = ",\n    ".join(json.dumps([v + 0.0 for v in row]) for row in value)
            text = f"[\n    {rows}\n  ]"
        elif isinstance(value, list):
            text = json.dumps([v + 0.0 for v in value])
        else:
            text = json.dumps(value)
        lines.append(f"  {json.dumps(key)}: {text}")
    return "{\n" + ",\n".join(lines) + "\n}\n"


def dump_instance(inst, path, tolerances=None):
    Path(path).write_text(dumps_instance(inst, tolerances))


def box(n, r=1.0):
    return HPolytope(np.vstack([np.eye(n), -np.eye(n)]), np.full(2 * n, float(r)))


def hyperboloid_family(n, r=2.0):
    """``w_1^2 + ... + w_{n-1}^2 - u^2 = 1`` on ``[-r, r]^n``."""
    Q = np.diag(np.r_[np.ones(n - 1), -1.0])
    return QuadInstance(Q, np.zeros(n), 1.0, box(n, r), f"hyperboloid-{n}")


def random_instance(seed, n=None):
    """Seeded random instance: a box with up to three cuts and a quadric through an interior point.

    The polytope is ``[-1, 1]^n`` intersected with ``k`` halfspaces
    ``a'x <= beta`` (``k`` uniform in 0..3, ``|a| = 1``, ``beta`` in
    ``[0.2, 0.8]``), so the origin stays interior.  ``Q`` and ``alpha`` have
    standard normal entries and ``g`` is the quadratic's value at a random
    point of the polytope, so ``S`` is never empty.
    """
    rng = np.random.default_rng(seed)
    if n is None:
        n = int(rng.integers(2, 4))
    k = int(rng.integers(0, 4))
    cuts = rng.normal(size=(k, n))
    cuts /= np.linalg.norm(cuts, axis=1, keepdims=True)
    beta = rng.uniform(0.2, 0.8, size=k)
    A = np.vstack([np.eye(n), -np.eye(n), cuts])
    b = np.r_[np.ones(2 * n), beta]
    Q = rng.normal(size=(n, n))
    Q = 0.5 * (Q + Q.T)
    alpha = rng.normal(size=n)
    while True:
        x0 = rng.uniform(-1, 1, size=n)
        if np.all(A @ x0 <= b - 1e-3):
            break
    g = float(x0 @ Q @ x0 + alpha @ x0)
    return QuadInstance(Q, alpha, g, HPolytope(A, b), f"random-{seed}")


def corpus_dir():
    return resources.files("quadhull") / "instances"


def corpus_paths():
    """Paths of the bundled instance files, sorted by name."""
    return sorted((p for p in corpus_dir().iterdir() if p.name.endswith(".json")), key=lambda p: p.name)


def load_corpus(validate=False):
    return [(p.name[:-5], *load_instance(p, validate)) for p in corpus_paths()]
