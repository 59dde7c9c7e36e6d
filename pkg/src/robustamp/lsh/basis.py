"""Monomial bases and the moment-entry table for the LStH programs."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError

ONE = ("1",)

MODES = ("nonrobust", "entrywise", "aggregated")


def v_mono(i):
    return ("v", int(i))


def w_mono(j):
    return ("w", int(j))


def x_mono(i, j):
    i, j = int(i), int(j)
    return ("x", i, j) if i <= j else ("x", j, i)


def r_mono(i):
    """Row aggregate (Xhat 1)_i in the aggregated robust basis."""
    return ("r", int(i))


def e_mono(i):
    """Corruption leak (Xhat (1 - W))_i in the aggregated robust basis."""
    return ("e", int(i))


def slack_mono(i, j):
    """Auxiliary entries for the operator-norm LMI block 5I - Xhat^2."""
    i, j = int(i), int(j)
    return ("s", i, j) if i <= j else ("s", j, i)


@dataclass
class MonomialBasis:
    """Ordered program monomials with a position index; 1 sits first.

    nonrobust: {1, v}. entrywise: {1, v, W, Xhat upper triangle} (the full
    degree-1 robust basis). aggregated: {1, v, W, R, E} with R = Xhat 1 and
    E = Xhat (1 - W), trading entrywise Xhat moments for the row aggregates
    the statistics and the recovery argument actually use.
    """

    n: int
    mode: str
    monomials: list = field(default_factory=list)
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown basis mode {self.mode!r}")
        if not self.monomials:
            n = self.n
            mono = [ONE] + [v_mono(i) for i in range(n)]
            if self.mode == "entrywise":
                mono += [w_mono(j) for j in range(n)]
                mono += [x_mono(i, j) for i in range(n) for j in range(i, n)]
            elif self.mode == "aggregated":
                mono += [w_mono(j) for j in range(n)]
                mono += [r_mono(i) for i in range(n)]
                mono += [e_mono(i) for i in range(n)]
            self.monomials = mono
        self.index = {m: k for k, m in enumerate(self.monomials)}
        if self.index.get(ONE) != 0:
            raise ConfigurationError("monomial 1 must be at position 0")

    @property
    def robust(self):
        return self.mode != "nonrobust"

    def __len__(self):
        return len(self.monomials)

    def position(self, mono):
        return self.index[mono]


class EntryTable:
    """Registry of stored moment entries pE[m1 * m2] (unordered pairs)."""

    def __init__(self):
        self.ids = {}
        self.pairs = []

    @staticmethod
    def _key(m1, m2):
        return (m1, m2) if m1 <= m2 else (m2, m1)

    def add(self, m1, m2):
        key = self._key(m1, m2)
        eid = self.ids.get(key)
        if eid is None:
            eid = len(self.pairs)
            self.ids[key] = eid
            self.pairs.append(key)
        return eid

    def get(self, m1, m2):
        return self.ids.get(self._key(m1, m2))

    def __len__(self):
        return len(self.pairs)

    def witness_values(self, assignment):
        """Entry vector for an integral assignment monomial -> value."""
        vals = np.empty(len(self.pairs))
        for eid, (m1, m2) in enumerate(self.pairs):
            vals[eid] = assignment[m1] * assignment[m2] if m1 != m2 else assignment[m1] ** 2
        return vals
