"""Comfortable trajectory planning for nonholonomic robots."""

from ._core import (
    FORMAT_VERSION,
    InvalidSpecError,
    ParseError,
    Problem,
    converge,
    gauss_rule,
    plan,
)

__all__ = [
    "FORMAT_VERSION",
    "InvalidSpecError",
    "ParseError",
    "Problem",
    "converge",
    "gauss_rule",
    "plan",
]
