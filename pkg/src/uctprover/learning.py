import ast
import logging
import math
from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.special import expit, logit

from .errors import ExampleFormatError, ModelFormatError, TrainingError
from .features import FEATURE_SPACE, MODE_VALUE, FeatureVector, feature_constants, policy_features, state_features

logger = logging.getLogger(__name__)

KIND_POLICY = "policy"
KIND_VALUE = "value"
MODEL_KINDS = (KIND_POLICY, KIND_VALUE)

MODEL_HEADER = "uctprover-model 1"
DEFAULT_REGULARIZATION = 1.5
DEFAULT_TEMPERATURE = 2.5
MAX_EPOCHS = 200
TOLERANCE = 1e-8
VALUE_CLAMP = (0.01, 0.99)


class Origin(NamedTuple):
    problem: str
    iteration: int
    bigstep: int

    def __str__(self):
        return f"{self.problem}:{self.iteration}:{self.bigstep}"

    @classmethod
    def parse(cls, text):
        problem, iteration, bigstep = text.rsplit(":", 2)
        return cls(problem, int(iteration), int(bigstep))


class TrainingExample(NamedTuple):
    features: object
    target: float
    kind: str = KIND_VALUE
    origin: Origin = None


def policy_target(ratio):
    """ln r_a for a visited action; r_a must be positive."""
    if ratio <= 0:
        raise ValueError("policy ratio must be positive")
    return math.log(ratio)


def value_target(value):
    """Logit of the bigstep value clamped into [0.01, 0.99]."""
    low, high = VALUE_CLAMP
    return float(logit(min(max(value, low), high)))


def _number(value):
    return format(float(value), ".17g")


class Model:
    """
    Linear regressor over the feature space.

    Attributes:
        kind (str): KIND_POLICY or KIND_VALUE.
        weights (numpy.ndarray): Dense weights of length FEATURE_SPACE.
        bias (float): Intercept; the prediction of the zero vector.
        metadata (dict): Training configuration and example count.
    """

    def __init__(self, kind, weights=None, bias=0.0, metadata=None):
        if kind not in MODEL_KINDS:
            raise ModelFormatError(f"unknown model kind '{kind}'")
        self.kind = kind
        self.weights = np.zeros(FEATURE_SPACE) if weights is None else np.asarray(weights, dtype=np.float64)
        self.bias = float(bias)
        self.metadata = dict(metadata or {})
        nonzero = np.flatnonzero(self.weights)
        self._lookup = dict(zip(nonzero.tolist(), self.weights[nonzero].tolist()))

    def predict(self, vector):
        lookup = self._lookup
        total = self.bias
        for index, value in vector.items():
            if not 0 <= index < FEATURE_SPACE:
                raise IndexError(f"feature index {index} outside [0, {FEATURE_SPACE})")
            weight = lookup.get(index)
            if weight is not None:
                total += weight * value
        return total

    def __repr__(self):
        return f"<Model {self.kind}: {len(self._lookup)} weights, bias {self.bias:.4g}>"


def predict(model, vector):
    """Dot product of the weights with a sparse vector, plus the bias."""
    return model.predict(vector)


def _design_matrix(examples):
    rows, columns, values = [], [], []
    for row, example in enumerate(examples):
        for index, value in example.features.items():
            if not 0 <= index < FEATURE_SPACE:
                raise TrainingError(f"example {row}: feature index {index} out of range")
            rows.append(row)
            columns.append(index)
            values.append(float(value))
    matrix = sparse.csc_matrix((values, (rows, columns)), shape=(len(examples), FEATURE_SPACE))
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def train(examples, regularization=DEFAULT_REGULARIZATION, max_epochs=MAX_EPOCHS, tolerance=TOLERANCE):
    """
    Fit L2-regularized least squares by cyclic coordinate descent.

    Minimizes mean((y - b - Xw)^2)/2 + regularization/2 * |w|^2 with an unpenalized bias,
    so repeating every example leaves the optimum unchanged.

    :param examples: Non-empty list of TrainingExample of a single kind.
    :param regularization: L2 weight penalty (lambda).
    :param max_epochs: Upper bound on full passes over the active features.
    :param tolerance: Stop once no coordinate moves by more than this in an epoch.
    :return: Trained Model.
    """
    if not examples:
        raise TrainingError("cannot train on an empty example list")
    kinds = {example.kind for example in examples}
    if len(kinds) != 1:
        raise TrainingError(f"examples mix kinds {sorted(kinds)}")
    kind = kinds.pop()
    n = len(examples)
    matrix = _design_matrix(examples)
    targets = np.array([example.target for example in examples], dtype=np.float64)
    if not np.all(np.isfinite(targets)):
        raise TrainingError("training targets must be finite")

    indptr, indices, data = matrix.indptr, matrix.indices, matrix.data
    active = np.flatnonzero(np.diff(indptr)).tolist()
    squares = {j: float(data[indptr[j]:indptr[j + 1]] @ data[indptr[j]:indptr[j + 1]]) / n for j in active}

    weights = np.zeros(FEATURE_SPACE)
    bias = float(targets.mean())
    residual = targets - bias
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        largest = 0.0
        for j in active:
            denominator = squares[j] + regularization
            if denominator <= 0.0:
                continue
            start, end = indptr[j], indptr[j + 1]
            rows = indices[start:end]
            column = data[start:end]
            old = weights[j]
            new = (float(column @ residual[rows]) / n + squares[j] * old) / denominator
            delta = new - old
            if delta != 0.0:
                residual[rows] -= column * delta
                weights[j] = new
                largest = max(largest, abs(delta))
        shift = float(residual.mean())
        bias += shift
        residual -= shift
        largest = max(largest, abs(shift))
        if largest < tolerance:
            break
    rmse = float(np.sqrt(np.mean(residual ** 2)))
    logger.info("Trained %s model on %d examples (%d features) in %d epochs, train RMSE %.4f",
                kind, n, len(active), epoch, rmse)
    metadata = {"regularization": regularization, "examples": n, "epochs": epoch,
                "max_epochs": max_epochs, "tolerance": tolerance}
    return Model(kind, weights, bias, metadata)


def evaluate_model(model, examples):
    """Root mean squared error of the model on the examples."""
    if not examples:
        raise TrainingError("cannot evaluate on an empty example list")
    errors = np.array([model.predict(example.features) - example.target for example in examples])
    return float(np.sqrt(np.mean(errors ** 2)))


def softmax(predictions, temperature=DEFAULT_TEMPERATURE):
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    scaled = np.asarray(predictions, dtype=np.float64) / temperature
    scaled -= scaled.max()
    exponentials = np.exp(scaled)
    return exponentials / exponentials.sum()


def policy_priors(model, state, actions, problem, temperature=DEFAULT_TEMPERATURE):
    """
    Prior probabilities of ``actions`` in ``state``.

    :return: Softmax of the predictions at the given temperature, or all ones without a model.
    """
    if model is None:
        return [1.0] * len(actions)
    if not actions:
        return []
    predictions = [model.predict(vector) for vector in policy_features(state, actions, problem)]
    return softmax(predictions, temperature).tolist()


def value_estimate(model, state, problem=None):
    """Sigmoid of the predicted logit of the state's value; always in (0, 1)."""
    return float(expit(model.predict(state_features(state, MODE_VALUE))))


def format_example(example):
    fields = [_number(example.target)]
    fields.extend(f"{index}:{_number(value)}" for index, value in example.features.items())
    line = " ".join(fields)
    if example.origin is not None:
        line += f" # {example.origin}"
    return line


def export_examples(examples, path):
    """Write examples as ``target idx:value ...`` lines, one example per line."""
    with open(path, "w") as handle:
        for example in examples:
            handle.write(format_example(example) + "\n")


def parse_example(line, kind=KIND_VALUE, number=1):
    origin = None
    if "#" in line:
        line, comment = line.split("#", 1)
        try:
            origin = Origin.parse(comment.strip())
        except ValueError:
            raise ExampleFormatError(f"malformed origin '{comment.strip()}'", number) from None
    fields = line.split()
    if not fields:
        raise ExampleFormatError("missing target", number)
    try:
        target = float(fields[0])
        pairs = [field.split(":") for field in fields[1:]]
        indices = [int(index) for index, _ in pairs]
        values = [float(value) for _, value in pairs]
    except ValueError:
        raise ExampleFormatError(f"malformed example '{line.strip()}'", number) from None
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise ExampleFormatError("feature indices must be strictly ascending", number)
    if indices and not (0 <= indices[0] and indices[-1] < FEATURE_SPACE):
        raise ExampleFormatError("feature index out of range", number)
    return TrainingExample(FeatureVector(indices, values), target, kind, origin)


def import_examples(path, kind=KIND_VALUE):
    """
    Read an example file written by export_examples.

    :raises ExampleFormatError: With the number of the first malformed line.
    """
    examples = []
    with open(path, "r") as handle:
        for number, line in enumerate(handle, start=1):
            if line.strip():
                examples.append(parse_example(line, kind, number))
    return examples


def format_model(model):
    lines = [MODEL_HEADER, f"kind {model.kind}"]
    for key in sorted(model.metadata):
        lines.append(f"meta {key} {model.metadata[key]!r}")
    for key, value in feature_constants().items():
        lines.append(f"constant {key} {value}")
    lines.append(f"bias {_number(model.bias)}")
    nonzero = np.flatnonzero(model.weights)
    lines.append(f"weights {len(nonzero)}")
    lines.extend(f"{index} {_number(model.weights[index])}" for index in nonzero.tolist())
    return "\n".join(lines) + "\n"


def save_model(model, path):
    with open(path, "w") as handle:
        handle.write(format_model(model))


def parse_model(text):
    lines = text.splitlines()
    if not lines or lines[0] != MODEL_HEADER:
        raise ModelFormatError("not a model file (bad header)")
    kind = None
    metadata = {}
    constants = {}
    bias = None
    weights = np.zeros(FEATURE_SPACE)
    position = 1
    try:
        while position < len(lines):
            line = lines[position]
            position += 1
            key, _, rest = line.partition(" ")
            if key == "kind":
                kind = rest
            elif key == "meta":
                name, _, value = rest.partition(" ")
                metadata[name] = ast.literal_eval(value)
            elif key == "constant":
                name, _, value = rest.partition(" ")
                constants[name] = int(value)
            elif key == "bias":
                bias = float(rest)
            elif key == "weights":
                count = int(rest)
                for line in lines[position:position + count]:
                    index, value = line.split()
                    weights[int(index)] = float(value)
                position += count
            else:
                raise ModelFormatError(f"unexpected line '{line}'")
    except (ValueError, IndexError, SyntaxError) as e:
        raise ModelFormatError(f"malformed model file: {e}") from None
    if constants != feature_constants():
        raise ModelFormatError("model was trained with different feature constants")
    if kind is None or bias is None:
        raise ModelFormatError("model file lacks kind or bias")
    return Model(kind, weights, bias, metadata)


def load_model(path):
    with open(path, "r") as handle:
        return parse_model(handle.read())
