"""JSON documents: parsing with located diagnostics, and canonical output.

Every top-level document carries ``"schema": "maxent-compat/v1"``.  Parse
failures raise ``SchemaError`` whose ``path`` points at the offending field
(``observables[1].terms[0].pauli``) or at the line/column of a JSON syntax
error.
"""

from __future__ import annotations

import hashlib
import json
import math
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from maxent_compat.errors import InvalidInstanceError, SchemaError
from maxent_compat.marginal import MarginalInstance, PROJECTION_TOL
from maxent_compat.operators import Observable, PauliTerm
from maxent_compat.povm import povm_instance, sic_povm
from maxent_compat.solver import CompatibilityInstance

SCHEMA = "maxent-compat/v1"


# -- canonical output ----------------------------------------------------------


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    if x == 0:
        return "0.0"
    s = f"{x:.17g}"
    if "e" not in s and "." not in s and "inf" not in s:
        s += ".0"
    return s


def to_jsonable(obj):
    """Convert numpy scalars/arrays and tuples into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def _emit(obj, indent, level, out):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, (list, dict)):
        items = sorted(obj.items()) if isinstance(obj, dict) else list(obj)
        open_, close = ("{", "}") if isinstance(obj, dict) else ("[", "]")
        if not items:
            out.append(open_ + close)
            return
        # flat lists of numbers stay on one line
        inline = indent is None or (
            isinstance(obj, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in items)
        )
        sep = ", " if indent is not None else ","
        out.append(open_)
        for k, item in enumerate(items):
            if k:
                out.append(sep if inline else ",")
            if not inline:
                out.append("\n" + " " * (indent * (level + 1)))
            if isinstance(obj, dict):
                out.append(json.dumps(item[0], ensure_ascii=False) + (": " if indent is not None else ":"))
                item = item[1]
            _emit(item, indent, level + 1, out)
        if not inline:
            out.append("\n" + " " * (indent * level))
        out.append(close)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_dumps(obj, indent: int | None = None) -> str:
    """Sorted keys, 17-significant-digit floats, no NaN/inf."""
    out: list[str] = []
    _emit(to_jsonable(obj), indent, 0, out)
    return "".join(out)


def digest(obj) -> str:
    return "sha256:" + hashlib.sha256(canonical_dumps(obj).encode()).hexdigest()


# -- parsing helpers -----------------------------------------------------------


def loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"line {e.lineno}, column {e.colno}", f"malformed JSON: {e.msg}") from None


def load_file(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise SchemaError(str(p), f"cannot read file: {e.strerror}") from None
    return loads(text)


def _sub(path, key):
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else key


def _get(doc, key, path, kind=None, required=True, default=None):
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an object")
    if key not in doc:
        if required:
            raise SchemaError(_sub(path, key), "missing required field")
        return default
    val = doc[key]
    if kind is not None and not _is(val, kind):
        raise SchemaError(_sub(path, key), f"expected {kind}, got {type(val).__name__}")
    return val


def _is(val, kind):
    if kind == "int":
        return isinstance(val, int) and not isinstance(val, bool)
    if kind == "number":
        return isinstance(val, (int, float)) and not isinstance(val, bool)
    if kind == "string":
        return isinstance(val, str)
    if kind == "array":
        return isinstance(val, list)
    if kind == "object":
        return isinstance(val, dict)
    raise AssertionError(kind)


def _number(val, path) -> float:
    if not _is(val, "number"):
        raise SchemaError(path, f"expected number, got {type(val).__name__}")
    if not math.isfinite(val):
        raise SchemaError(path, "number must be finite")
    return float(val)


def _numbers(val, path) -> list[float]:
    if not isinstance(val, list):
        raise SchemaError(path, "expected an array of numbers")
    return [_number(v, _sub(path, i)) for i, v in enumerate(val)]


def check_schema(doc, path=""):
    tag = _get(doc, "schema", path, "string")
    if tag != SCHEMA:
        raise SchemaError(_sub(path, "schema"), f"unsupported schema {tag!r}, expected {SCHEMA!r}")


def _n_qubits(doc, path, default=None) -> int:
    n = _get(doc, "n_qubits", path, "int", required=default is None, default=default)
    if n < 1:
        raise SchemaError(_sub(path, "n_qubits"), "must be at least 1")
    return n


@contextmanager
def _wrap(path):
    """Re-raise validation errors from constructors at ``path``."""
    try:
        yield
    except SchemaError:
        raise
    except InvalidInstanceError as exc:
        raise SchemaError(path, str(exc)) from exc


# -- documents -----------------------------------------------------------------


def _complex(entry, path) -> complex:
    if isinstance(entry, list):
        if len(entry) != 2:
            raise SchemaError(path, "complex entry must be [re, im]")
        return complex(_number(entry[0], _sub(path, 0)), _number(entry[1], _sub(path, 1)))
    return complex(_number(entry, path))


def parse_complex_vector(val, path) -> np.ndarray:
    if not isinstance(val, list) or not val:
        raise SchemaError(path, "expected a nonempty array")
    return np.array([_complex(e, _sub(path, i)) for i, e in enumerate(val)], dtype=np.complex128)


def parse_complex_matrix(val, path) -> np.ndarray:
    """Row-major list of rows; entries are ``[re, im]`` pairs or bare reals."""
    if not isinstance(val, list) or not val:
        raise SchemaError(path, "expected a nonempty array of rows")
    rows = []
    for i, row in enumerate(val):
        rp = _sub(path, i)
        if not isinstance(row, list) or len(row) != len(val):
            raise SchemaError(rp, f"expected a row of length {len(val)}")
        rows.append([_complex(e, _sub(rp, j)) for j, e in enumerate(row)])
    return np.array(rows, dtype=np.complex128)


def dense_json(m) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def parse_operator(doc, path="", n_default: int | None = None) -> Observable:
    if not isinstance(doc, dict):
        raise SchemaError(path, "expected an operator object")
    n = _n_qubits(doc, path, n_default)
    has_terms, has_dense = "terms" in doc, "dense" in doc
    if has_terms == has_dense:
        raise SchemaError(path, "operator needs exactly one of 'terms' or 'dense'")
    if has_dense:
        m = parse_complex_matrix(doc["dense"], _sub(path, "dense"))
        if m.shape != (1 << n, 1 << n):
            raise SchemaError(_sub(path, "dense"), f"matrix is {m.shape[0]}x{m.shape[1]}, expected {1 << n}x{1 << n}")
        with _wrap(_sub(path, "dense")):
            return Observable(n, matrix=m)
    terms_doc = _get(doc, "terms", path, "array")
    if not terms_doc:
        raise SchemaError(_sub(path, "terms"), "need at least one term")
    terms = []
    for i, t in enumerate(terms_doc):
        tp = _sub(_sub(path, "terms"), i)
        letters = _get(t, "pauli", tp, "string")
        weight = _number(_get(t, "weight", tp, required=False, default=1.0), _sub(tp, "weight"))
        with _wrap(_sub(tp, "pauli")):
            term = PauliTerm(letters, weight)
        if term.n_qubits != n:
            raise SchemaError(_sub(tp, "pauli"), f"string has {term.n_qubits} letters, expected {n}")
        terms.append(term)
    return Observable(n, terms=terms)


def operator_json(op: Observable) -> dict:
    if op.is_pauli:
        return {"n_qubits": op.n_qubits, "terms": [{"pauli": t.letters, "weight": t.weight} for t in op.terms]}
    return {"n_qubits": op.n_qubits, "dense": dense_json(op.matrix)}


def parse_instance(doc) -> CompatibilityInstance:
    """Observable/target instance, or a SIC-POVM instance with probabilities."""
    check_schema(doc)
    n = _n_qubits(doc, "")
    if "povm" in doc:
        kind = _get(doc, "povm", "", "string")
        if kind != "sic":
            raise SchemaError("povm", f"unknown POVM {kind!r}; only 'sic' is supported")
        probs = _numbers(_get(doc, "probabilities", "", "array"), "probabilities")
        with _wrap("probabilities"):
            return povm_instance(sic_povm(n), probs)
    obs_doc = _get(doc, "observables", "", "array")
    targets = _numbers(_get(doc, "targets", "", "array"), "targets")
    if len(obs_doc) != len(targets):
        raise SchemaError("targets", f"{len(targets)} targets for {len(obs_doc)} observables")
    obs = [parse_operator(o, _sub("observables", i), n_default=n) for i, o in enumerate(obs_doc)]
    for i, o in enumerate(obs):
        if o.n_qubits != n:
            raise SchemaError(_sub(_sub("observables", i), "n_qubits"), f"{o.n_qubits} does not match n_qubits {n}")
    with _wrap(""):
        return CompatibilityInstance(n, obs, targets)


def instance_json(instance: CompatibilityInstance) -> dict:
    return {
        "schema": SCHEMA,
        "n_qubits": instance.n_qubits,
        "observables": [operator_json(o) for o in instance.observables],
        "targets": [float(t) for t in instance.targets],
    }


@dataclass
class MarginalDocument:
    instance: MarginalInstance
    reference: np.ndarray | None


def parse_marginal(doc, projection_tol: float = PROJECTION_TOL) -> MarginalDocument:
    """Marginal instance plus an optional pure ``reference`` state vector."""
    check_schema(doc)
    n = _n_qubits(doc, "")
    parts_doc = _get(doc, "parts", "", "array")
    if not parts_doc:
        raise SchemaError("parts", "need at least one part")
    parts = []
    for i, p in enumerate(parts_doc):
        pp = _sub("parts", i)
        qubits = _get(p, "qubits", pp, "array")
        for j, q in enumerate(qubits):
            if not _is(q, "int"):
                raise SchemaError(_sub(_sub(pp, "qubits"), j), "qubit index must be an integer")
        rho = parse_complex_matrix(_get(p, "rho", pp), _sub(pp, "rho"))
        parts.append((qubits, rho))
    with _wrap("parts"):
        mi = MarginalInstance(n, parts, projection_tol=projection_tol)
    ref = None
    if "reference" in doc:
        ref = parse_complex_vector(doc["reference"], "reference")
        if len(ref) != 1 << n:
            raise SchemaError("reference", f"expected a state vector of length {1 << n}")
        if np.linalg.norm(ref) == 0:
            raise SchemaError("reference", "state vector is zero")
    return MarginalDocument(mi, ref)


def marginal_json(mi: MarginalInstance, reference=None) -> dict:
    doc = {
        "schema": SCHEMA,
        "n_qubits": mi.n_qubits,
        "parts": [{"qubits": list(p.qubits), "rho": dense_json(p.rho)} for p in mi.parts],
    }
    if reference is not None:
        doc["reference"] = [[float(z.real), float(z.imag)] for z in np.asarray(reference, dtype=complex)]
    return doc


def parse_operator_pair(doc) -> tuple[Observable, Observable]:
    check_schema(doc)
    a1 = parse_operator(_get(doc, "A1", "", "object"), "A1")
    a2 = parse_operator(_get(doc, "A2", "", "object"), "A2")
    if a1.n_qubits != a2.n_qubits:
        raise SchemaError("A2.n_qubits", f"{a2.n_qubits} does not match A1's {a1.n_qubits}")
    return a1, a2


def parse_hamiltonian(doc) -> tuple[int, list[Observable]]:
    """Local terms ``h[m]`` in sweep order; each term inherits ``n_qubits``."""
    check_schema(doc)
    n = _n_qubits(doc, "")
    terms_doc = _get(doc, "terms", "", "array")
    terms = [parse_operator(t, _sub("terms", i), n_default=n) for i, t in enumerate(terms_doc)]
    for i, t in enumerate(terms):
        if t.n_qubits != n:
            raise SchemaError(_sub(_sub("terms", i), "n_qubits"), f"{t.n_qubits} does not match n_qubits {n}")
    return n, terms


def parse_povm(doc) -> tuple[int, list[float] | None]:
    check_schema(doc)
    n = _n_qubits(doc, "")
    kind = _get(doc, "povm", "", "string", required=False, default="sic")
    if kind != "sic":
        raise SchemaError("povm", f"unknown POVM {kind!r}; only 'sic' is supported")
    probs = doc.get("probabilities")
    return n, None if probs is None else _numbers(probs, "probabilities")
