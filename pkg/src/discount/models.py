"""Black-box scalar models ``b: R^d -> R`` with input gradients.

Built-in models are small numpy networks with exact backpropagation:
logistic regression, a tanh MLP and an RBF network, all with a sigmoid
output by default so predictions are probabilities. Models living in another
process are reached through a newline-delimited JSON protocol on the child's
stdin/stdout; their gradients come from central differences.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ExternalModelError, InvalidArgumentError, TrainingDivergedError

__all__ = [
    "ModelHandle",
    "ModelSpec",
    "BuiltinModel",
    "ExternalModel",
    "init_spec",
    "train",
    "external_model",
    "load_model",
    "save_model",
    "serve",
    "finite_difference_gradient",
]

PROTOCOL_VERSION = 1
FD_STEP = 1e-5
KINDS = ("logistic", "mlp", "rbf")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


_ACTIVATIONS = {
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
    "sigmoid": (_sigmoid, lambda a: a * (1.0 - a)),
}


class ModelHandle:
    """Interface the optimiser needs from a model."""

    input_dim: int
    provenance: str = "abstract"

    def predict(self, x) -> np.ndarray:
        raise NotImplementedError

    def input_gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def _check(self, x) -> np.ndarray:
        pts = np.asarray(getattr(x, "points", x), dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :] if pts.shape[0] == self.input_dim else pts[:, None]
        if pts.ndim != 2 or pts.shape[1] != self.input_dim:
            raise InvalidArgumentError(f"model expects inputs of dimension {self.input_dim}, got shape {pts.shape}")
        return pts


def finite_difference_gradient(predict, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central-difference input gradient, one batched ``predict`` call."""
    n, d = x.shape
    eye = np.eye(d) * h
    plus = (x[:, None, :] + eye[None]).reshape(n * d, d)
    minus = (x[:, None, :] - eye[None]).reshape(n * d, d)
    out = np.asarray(predict(np.vstack([plus, minus])), dtype=float)
    return ((out[: n * d] - out[n * d:]) / (2.0 * h)).reshape(n, d)


@dataclass
class ModelSpec:
    """Architecture plus a flat weight vector.

    Weight layout, by kind:

    * ``logistic`` / ``mlp`` with ``dims = [d, h1, ..., 1]``: for each layer the
      ``in x out`` matrix (row-major) followed by its bias. Logistic
      regression is the MLP without hidden layers.
    * ``rbf`` with ``dims = [d, K]``: ``K x d`` centers, ``K`` widths, ``K``
      output weights, one output bias.
    """

    kind: str
    dims: list[int]
    weights: np.ndarray | None = None
    activation: str = "tanh"
    output: str = "sigmoid"
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown model kind {self.kind!r}")
        self.dims = [int(v) for v in self.dims]
        if self.kind == "logistic" and len(self.dims) != 2:
            raise InvalidArgumentError("logistic dims must be [d, 1]")
        if self.kind in ("logistic", "mlp") and (len(self.dims) < 2 or self.dims[-1] != 1):
            raise InvalidArgumentError("mlp dims must start at the input size and end with 1")
        if self.kind == "rbf" and len(self.dims) != 2:
            raise InvalidArgumentError("rbf dims must be [d, n_centers]")
        if min(self.dims) < 1:
            raise InvalidArgumentError("all dims must be positive")
        if self.activation not in _ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation {self.activation!r}")
        if self.output not in ("sigmoid", "linear"):
            raise InvalidArgumentError(f"unknown output {self.output!r}")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
            if self.weights.size != self.n_weights:
                raise InvalidArgumentError(
                    f"{self.kind} with dims {self.dims} needs {self.n_weights} weights, got {self.weights.size}"
                )

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def n_weights(self) -> int:
        if self.kind == "rbf":
            d, k = self.dims
            return k * d + 2 * k + 1
        return sum(a * b + b for a, b in zip(self.dims[:-1], self.dims[1:]))

    def layers(self, weights=None) -> list[tuple[np.ndarray, np.ndarray]]:
        w = self.weights if weights is None else weights
        out, pos = [], 0
        for a, b in zip(self.dims[:-1], self.dims[1:]):
            mat = w[pos:pos + a * b].reshape(a, b)
            pos += a * b
            out.append((mat, w[pos:pos + b]))
            pos += b
        return out

    def rbf_parts(self, weights=None):
        w = self.weights if weights is None else weights
        d, k = self.dims
        centers = w[: k * d].reshape(k, d)
        widths = w[k * d: k * d + k]
        coef = w[k * d + k: k * d + 2 * k]
        return centers, widths, coef, w[-1]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "dims": list(self.dims),
            "weights": [float(v) for v in self.weights],
            "feature_names": list(self.feature_names),
            "activation": self.activation,
            "output": self.output,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ModelSpec":
        try:
            return cls(
                kind=doc["kind"],
                dims=doc["dims"],
                weights=doc["weights"],
                activation=doc.get("activation", "tanh"),
                output=doc.get("output", "sigmoid"),
                feature_names=list(doc.get("feature_names", [])),
            )
        except KeyError as exc:
            raise InvalidArgumentError(f"model document is missing field {exc}") from None


class BuiltinModel(ModelHandle):
    """Immutable in-process model backed by a :class:`ModelSpec`."""

    def __init__(self, spec: ModelSpec):
        if spec.weights is None:
            raise InvalidArgumentError("model spec has no weights")
        self.spec = spec
        self.input_dim = spec.input_dim
        self.provenance = f"builtin:{spec.kind}"

    def _logit(self, x: np.ndarray, weights=None):
        """Output pre-activation plus whatever the backward pass needs."""
        spec = self.spec
        if spec.kind == "rbf":
            centers, widths, coef, bias = spec.rbf_parts(weights)
            diff = x[:, None, :] - centers[None]
            phi = np.exp(-np.sum(diff * diff, axis=2) / (2.0 * widths**2))
            return phi @ coef + bias, (diff, phi)
        act = _ACTIVATIONS[spec.activation][0]
        acts = [x]
        layers = spec.layers(weights)
        h = x
        for i, (w, b) in enumerate(layers):
            pre = h @ w + b
            h = pre if i == len(layers) - 1 else act(pre)
            acts.append(h)
        return acts[-1][:, 0], acts

    def _squash(self, z):
        if self.spec.output == "sigmoid":
            p = _sigmoid(z)
            return p, p * (1.0 - p)
        return z, np.ones_like(z)

    def predict(self, x) -> np.ndarray:
        z, _ = self._logit(self._check(x))
        return self._squash(z)[0]

    def input_gradient(self, x) -> np.ndarray:
        pts = self._check(x)
        z, cache = self._logit(pts)
        dz = self._squash(z)[1]
        spec = self.spec
        if spec.kind == "rbf":
            _, widths, coef, _ = spec.rbf_parts()
            diff, phi = cache
            g = -np.einsum("nk,nkd->nd", phi * (coef / widths**2)[None], diff)
            return dz[:, None] * g
        deriv = _ACTIVATIONS[spec.activation][1]
        layers = spec.layers()
        grad = dz[:, None]
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            grad = grad @ w.T
            if i > 0:
                grad = grad * deriv(cache[i])
        return grad

    def loss_and_grad(self, x: np.ndarray, labels: np.ndarray, weights: np.ndarray):
        """Training loss and its gradient with respect to the flat weights.

        Sigmoid outputs use binary cross-entropy, linear outputs squared
        error. For RBF networks only the output weights and bias are fitted.
        """
        spec = self.spec
        n = x.shape[0]
        z, cache = self._logit(x, weights)
        if spec.output == "sigmoid":
            p = _sigmoid(z)
            eps = 1e-12
            loss = -np.mean(labels * np.log(p + eps) + (1.0 - labels) * np.log(1.0 - p + eps))
            dz = (p - labels) / n
        else:
            loss = np.mean((z - labels) ** 2)
            dz = 2.0 * (z - labels) / n
        grad = np.zeros_like(weights)
        if spec.kind == "rbf":
            d, k = spec.dims
            _, phi = cache
            grad[k * d + k: k * d + 2 * k] = phi.T @ dz
            grad[-1] = dz.sum()
            return float(loss), grad
        deriv = _ACTIVATIONS[spec.activation][1]
        layers = spec.layers(weights)
        offsets, pos = [], 0
        for a, b in zip(spec.dims[:-1], spec.dims[1:]):
            offsets.append(pos)
            pos += a * b + b
        delta = dz[:, None]
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            a, b = w.shape
            inp = cache[i]
            start = offsets[i]
            grad[start:start + a * b] = (inp.T @ delta).ravel()
            grad[start + a * b:start + a * b + b] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ w.T) * deriv(cache[i])
        return float(loss), grad


def init_spec(
    kind: str,
    input_dim: int,
    seed: int = 0,
    hidden: Sequence[int] = (16,),
    n_centers: int = 10,
    activation: str = "tanh",
    output: str = "sigmoid",
    data: np.ndarray | None = None,
    feature_names: Sequence[str] = (),
) -> ModelSpec:
    """Seeded initial weights.

    Dense layers draw uniformly from ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``.
    RBF centers are data points when ``data`` is given (standard normal
    draws otherwise) and share the median inter-center distance as width.
    """
    rng = np.random.default_rng(seed)
    if kind == "rbf":
        if data is not None:
            pts = np.asarray(data, dtype=float)
            k = min(n_centers, pts.shape[0])
            centers = pts[rng.choice(pts.shape[0], size=k, replace=False)]
        else:
            k = n_centers
            centers = rng.standard_normal((k, input_dim))
        if k > 1:
            dist = np.linalg.norm(centers[:, None] - centers[None], axis=2)[np.triu_indices(k, 1)]
            width = float(np.median(dist)) or 1.0
        else:
            width = 1.0
        bound = 1.0 / np.sqrt(k)
        w = np.concatenate([centers.ravel(), np.full(k, width), rng.uniform(-bound, bound, k), [0.0]])
        return ModelSpec("rbf", [input_dim, k], w, activation, output, list(feature_names))
    dims = [input_dim, 1] if kind == "logistic" else [input_dim, *[int(h) for h in hidden], 1]
    parts = []
    for a, b in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(a)
        parts.append(rng.uniform(-bound, bound, a * b))
        parts.append(rng.uniform(-bound, bound, b))
    return ModelSpec(kind, dims, np.concatenate(parts), activation, output, list(feature_names))


def train(
    spec: ModelSpec,
    data,
    labels,
    epochs: int = 500,
    lr: float = 0.5,
    seed: int = 0,
) -> tuple[BuiltinModel, float]:
    """Full-batch gradient descent; returns the fitted model and final loss.

    A spec without weights is initialised from ``seed`` first.
    """
    x = np.asarray(getattr(data, "points", data), dtype=float)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise InvalidArgumentError("labels and data differ in length")
    if np.any((y < 0) | (y > 1)):
        raise InvalidArgumentError("labels must lie in [0, 1]")
    if lr <= 0:
        raise InvalidArgumentError("learning rate must be positive")
    if spec.weights is None:
        init = init_spec(
            spec.kind, x.shape[1], seed,
            hidden=spec.dims[1:-1] if spec.kind == "mlp" else (16,),
            n_centers=spec.dims[1] if spec.kind == "rbf" else 10,
            activation=spec.activation, output=spec.output, data=x,
            feature_names=spec.feature_names,
        )
        spec = init
    model = BuiltinModel(spec)
    w = spec.weights.copy()
    loss = float("nan")
    for _ in range(int(epochs)):
        loss, grad = model.loss_and_grad(x, y, w)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise TrainingDivergedError(f"training diverged (loss={loss})")
        w = w - lr * grad
    loss, _ = model.loss_and_grad(x, y, w)
    if not np.isfinite(loss):
        raise TrainingDivergedError(f"training diverged (loss={loss})")
    fitted = ModelSpec(spec.kind, spec.dims, w, spec.activation, spec.output, list(spec.feature_names))
    return BuiltinModel(fitted), loss


def save_model(spec: ModelSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_json(), indent=2), encoding="utf-8")


def load_model(path) -> BuiltinModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{path}: not a JSON model file ({exc})") from None
    return BuiltinModel(ModelSpec.from_json(doc))


class ExternalModel(ModelHandle):
    """Model served by a child process over newline-delimited JSON.

    One request is in flight at a time; a lock serialises callers.
    """

    def __init__(self, command: Sequence[str], timeout: float = 30.0, protocol: int = PROTOCOL_VERSION):
        self.command = list(command)
        self.timeout = timeout
        self.provenance = "external:" + " ".join(shlex.quote(c) for c in self.command)
        self._lock = threading.Lock()
        self._lines: queue.Queue = queue.Queue()
        self._batches = 0
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding="utf-8", bufsize=1,
            )
        except OSError as exc:
            raise ExternalModelError(f"cannot start external model: {exc}") from None
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        reply = self._request({"op": "hello"}, None)
        if reply.get("protocol") != protocol:
            self.close()
            raise ExternalModelError(f"unsupported protocol {reply.get('protocol')!r}, expected {protocol}")
        try:
            self.input_dim = int(reply["input_dim"])
        except (KeyError, TypeError, ValueError):
            self.close()
            raise ExternalModelError("handshake reply lacks input_dim") from None

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _request(self, payload: dict, batch_index):
        with self._lock:
            if self._proc.poll() is not None:
                raise ExternalModelError(f"external model exited with code {self._proc.returncode}", batch_index)
            try:
                self._proc.stdin.write(json.dumps(payload) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError, ValueError):
                raise ExternalModelError("external model closed its input", batch_index) from None
            try:
                line = self._lines.get(timeout=self.timeout)
            except queue.Empty:
                raise ExternalModelError(f"external model timed out after {self.timeout}s", batch_index) from None
        if line is None:
            raise ExternalModelError("external model exited before answering", batch_index)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            raise ExternalModelError(f"malformed response {line.strip()[:80]!r}", batch_index) from None
        if not isinstance(reply, dict):
            raise ExternalModelError("response is not a JSON object", batch_index)
        if "error" in reply:
            raise ExternalModelError(f"external model error: {reply['error']}", batch_index)
        return reply

    def predict(self, x) -> np.ndarray:
        pts = self._check(x)
        index = self._batches
        self._batches += 1
        reply = self._request({"op": "predict", "x": pts.tolist()}, index)
        try:
            y = np.asarray(reply["y"], dtype=float).reshape(-1)
        except (KeyError, TypeError, ValueError):
            raise ExternalModelError("response lacks a numeric 'y' array", index) from None
        if y.shape[0] != pts.shape[0]:
            raise ExternalModelError(f"expected {pts.shape[0]} outputs, got {y.shape[0]}", index)
        return y

    def input_gradient(self, x) -> np.ndarray:
        return finite_difference_gradient(self.predict, self._check(x))

    def close(self):
        proc = getattr(self, "_proc", None)
        if proc is None or proc.poll() is not None:
            return
        try:
            proc.stdin.close()
            proc.wait(timeout=2)
        except Exception:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def external_model(descriptor, timeout: float = 30.0, protocol: int = PROTOCOL_VERSION) -> ExternalModel:
    """Start ``descriptor`` (a command line string or argv list) and handshake."""
    argv = shlex.split(descriptor) if isinstance(descriptor, str) else list(descriptor)
    if not argv:
        raise InvalidArgumentError("empty external model command")
    return ExternalModel(argv, timeout=timeout, protocol=protocol)


def serve(model: ModelHandle, instream=None, outstream=None) -> None:
    """Answer protocol requests for ``model`` until ``instream`` closes."""
    instream = instream or sys.stdin
    outstream = outstream or sys.stdout
    for line in instream:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
            op = req.get("op")
            if op == "hello":
                reply = {"protocol": PROTOCOL_VERSION, "input_dim": model.input_dim}
            elif op == "predict":
                reply = {"y": [float(v) for v in model.predict(np.asarray(req["x"], dtype=float))]}
            else:
                reply = {"error": f"unknown op {op!r}"}
        except Exception as exc:  # report, keep serving
            reply = {"error": str(exc)}
        outstream.write(json.dumps(reply) + "\n")
        outstream.flush()
