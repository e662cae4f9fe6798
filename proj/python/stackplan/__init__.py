"""Grasp planning for stacked tableware.

Scenes, plans, records and configs are plain dicts in the same JSON layout the
command line tool reads and writes.
"""

from ._core import (
    InvalidInput,
    aggregate,
    evaluate,
    generate_scene,
    plan,
    planners,
    reward,
    simulate,
    validate_scene,
)

__all__ = [
    "InvalidInput",
    "aggregate",
    "evaluate",
    "generate_scene",
    "plan",
    "planners",
    "reward",
    "simulate",
    "validate_scene",
]
