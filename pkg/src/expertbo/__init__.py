"""Expert-in-the-loop meta Bayesian optimization.

A meta-trained sequence-model surrogate proposes candidates jointly with a
pairwise expert-preference model through a time-decayed acquisition; runs are
driven either by a simulated expert, the benchmark CLI, or a live session
service with feature-attribution explanations.
"""

from . import acquisition, explain, families, preference, surrogate, tasks

__version__ = "0.1.0"

__all__ = [
    "acquisition",
    "explain",
    "families",
    "preference",
    "surrogate",
    "tasks",
]
