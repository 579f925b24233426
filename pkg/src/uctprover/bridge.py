"""
File-based bridge to an external regression tool.

The orchestrator exports the example file, runs the configured command and reads back
a model file in the in-tree format (linear weights over the same feature space).
"""
import logging
import os
import shlex
import subprocess

import yaml

from .errors import ConfigurationError, TrainingError
from .learning import export_examples, load_model

logger = logging.getLogger(__name__)

BOOSTED_TREE_SETTINGS = {
    "num_boost_round": 400,
    "max_depth": 9,
    "eta": 0.3,
    "early_stopping_rounds": 200,
    "lambda": 1.5,
    "objective": "reg:squarederror",
}


def bridge_template(command="your-learner --train {train} --out {model} --kind {kind} --settings {settings}"):
    """Commented YAML snippet for the ``bridge`` section, with the boosted-tree settings."""
    body = yaml.safe_dump({"bridge": {"command": command, "settings": BOOSTED_TREE_SETTINGS}},
                          sort_keys=False, default_flow_style=False)
    header = ("# The command receives the example file ({train}), must write a model file ({model})\n"
              "# in the uctprover model format and is told the model kind ({kind}). The settings\n"
              "# below are written to a YAML file passed as {settings}.\n")
    return header + body


def train_external(examples, kind, command, workdir, settings=None):
    """
    Train a model with an external command.

    :param examples: TrainingExample list written to ``<workdir>/<kind>.examples``.
    :param kind: "policy" or "value".
    :param command: Command template with ``{train}``, ``{model}``, ``{kind}`` and ``{settings}`` placeholders.
    :param workdir: Directory for the exchanged files.
    :param settings: Learner parameters, written to ``<workdir>/<kind>.settings.yml``.
    :return: The Model read back from ``<workdir>/<kind>.model``.
    """
    if not command:
        raise ConfigurationError("bridge.command is not set")
    if not examples:
        raise TrainingError("cannot train on an empty example list")
    os.makedirs(workdir, exist_ok=True)
    train_path = os.path.join(workdir, f"{kind}.examples")
    model_path = os.path.join(workdir, f"{kind}.model")
    settings_path = os.path.join(workdir, f"{kind}.settings.yml")
    export_examples(examples, train_path)
    with open(settings_path, "w") as handle:
        yaml.safe_dump(dict(settings or {}), handle, sort_keys=True, default_flow_style=False)
    try:
        arguments = [part.format(train=train_path, model=model_path, kind=kind, settings=settings_path)
                     for part in shlex.split(command)]
    except (KeyError, IndexError) as e:
        raise ConfigurationError(f"bridge.command has an unknown placeholder: {e}") from None
    logger.info("Running external learner: %s", " ".join(arguments))
    try:
        completed = subprocess.run(arguments, capture_output=True, text=True, check=False)
    except OSError as e:
        raise TrainingError(f"cannot run external learner: {e}") from None
    if completed.returncode != 0:
        raise TrainingError(f"external learner exited with code {completed.returncode}: "
                            f"{completed.stderr.strip()}")
    if not os.path.exists(model_path):
        raise TrainingError(f"external learner did not write {model_path}")
    model = load_model(model_path)
    if model.kind != kind:
        raise TrainingError(f"external learner wrote a {model.kind} model, expected {kind}")
    return model
