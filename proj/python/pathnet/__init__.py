"""Path-based multi-hop question answering: extraction, retrieval, training."""

import json
import os

from . import _pathnet
from ._pathnet import PathNetError, set_warnings_enabled, tokenize

__all__ = [
    "PathNetError",
    "evaluate",
    "explain",
    "extract_paths",
    "generate_synthetic",
    "gradient_check",
    "retrieve",
    "set_warnings_enabled",
    "tokenize",
    "train",
]

__version__ = "0.1.0"


def extract_paths(record, fmt="wikihop", **config):
    """Paths from the question's head entity to each candidate of one record.

    `config` keys: max_hops, max_neighbors, max_passages_per_entity,
    max_paths_per_candidate.
    """
    return json.loads(_pathnet.extract_paths(json.dumps(record), fmt, json.dumps(config)))


def retrieve(corpus, question, candidate, **config):
    """Scored two-sentence chains linking `question` to `candidate`.

    `config` keys: threshold, top_k, beam, prune_prefix.
    """
    return json.loads(_pathnet.retrieve(list(corpus), question, candidate, json.dumps(config)))


def generate_synthetic(**config):
    """A synthetic compositional dataset as {"rules": ..., "records": [...]}."""
    return json.loads(_pathnet.generate_synthetic(json.dumps(config)))


def train(config):
    """Trains from a config dict (same schema as the CLI's JSON config).

    Returns the epoch history and best dev accuracy; the checkpoint goes to
    config["checkpoint_path"].
    """
    return json.loads(_pathnet.train(json.dumps(config)))


def evaluate(checkpoint, records, fmt=""):
    """Evaluation report of a checkpoint on a list of dataset records."""
    return json.loads(_pathnet.evaluate(os.fspath(checkpoint), json.dumps(list(records)), fmt))


def explain(checkpoint, records, k=2, fmt=""):
    """Top-k scored paths with probabilities for each record."""
    return json.loads(
        _pathnet.explain(os.fspath(checkpoint), json.dumps(list(records)), fmt, int(k))
    )


def gradient_check(composition="ffl", hidden=8, embedding_dim=10, eps=4e-3):
    """Finite-difference check of the full loss on a small fixed instance."""
    return json.loads(_pathnet.gradient_check(composition, hidden, embedding_dim, eps))
