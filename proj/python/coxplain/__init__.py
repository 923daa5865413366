"""Multimodal Cox survival models with Shapley interaction audits.

Thin wrapper around the compiled ``_core`` module: heavy lifting stays in
C++, this layer just parses JSON reports into dicts and re-exports the
bound classes.
"""

import json as _json

from ._core import (
    Dataset,
    Model,
    concordance_index,
    cox_nll,
    generate,
    spearman,
    train_holdout,
)
from ._core import audit_csv
from ._core import audit_json as _audit_json
from ._core import validate_json as _validate_json

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Model",
    "audit",
    "audit_csv",
    "concordance_index",
    "cox_nll",
    "generate",
    "spearman",
    "train_holdout",
    "validate",
]


def audit(model, dataset, masking="mean", convention="moebius", replicates=8,
          seed=42, threads=1):
    """Interaction audit of ``model`` on ``dataset`` as a nested dict.

    Keys mirror the CLI report: ``format``, ``global``, ``per_patient``,
    ``metadata``.
    """
    return _json.loads(
        _audit_json(model, dataset, masking=masking, convention=convention,
                    replicates=replicates, seed=seed, threads=threads))


def validate(n=2000, dims=16, beta=2.0, sigma=0.3, event_fraction=0.65,
             seed=42, threads=1, only=""):
    """Run the synthetic validation suite and return its report as a dict.

    ``only`` restricts to checks whose name contains the substring, e.g.
    ``"redundancy-reference"``.
    """
    return _json.loads(
        _validate_json(n=n, dims=dims, beta=beta, sigma=sigma,
                       event_fraction=event_fraction, seed=seed,
                       threads=threads, only=only))
