"""Recorded forward trace consumed by :mod:`ycda.autograd`."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class Node:
    op: str
    inputs: tuple[str, ...]
    output: str
    saved: dict[str, Any]


@dataclass
class Tape:
    """Ordered list of executed operations with the intermediates they need.

    Values are referred to by name; a name may feed several nodes (the
    activated stem output feeds both statistics and gating), and backward
    accumulates into it.
    """

    nodes: list[Node] = field(default_factory=list)

    def record(self, op: str, inputs, output: str, **saved) -> None:
        self.nodes.append(Node(op, tuple(inputs), output, saved))

    def __len__(self) -> int:
        return len(self.nodes)
