"""Rooted-tree / lumber / forest polynomial algebra.

A tree is stored canonically as the multiset of subtrees hanging off the
root, sorted by AHU encoding: the empty tree has no children, rerooting
wraps a tree as the single child of a fresh root, and grafting merges the
child lists of two non-empty trees. Evaluation: empty -> all-ones vector,
each child contributes an entrywise factor X @ child(X).
"""

import json
from functools import total_ordering

import numpy as np

from ..errors import ConfigurationError, ResourceError

LUMBER_DEGREE_GUARD = 6


@total_ordering
class Tree:
    __slots__ = ("children", "_key", "_degree")

    def __init__(self, children=()):
        kids = tuple(sorted(children, key=lambda c: c._key))
        object.__setattr__(self, "children", kids)
        object.__setattr__(self, "_key", tuple(c._key for c in kids))
        object.__setattr__(self, "_degree", sum(1 + c._degree for c in kids))

    def __setattr__(self, name, value):
        raise AttributeError("Tree is immutable")

    @property
    def degree(self):
        return self._degree

    def is_empty(self):
        return not self.children

    def key(self):
        """Canonical AHU encoding; equal keys iff rooted-isomorphic."""
        return self._key

    def __eq__(self, other):
        return isinstance(other, Tree) and self._key == other._key

    def __lt__(self, other):
        return (self._degree, self._key) < (other._degree, other._key)

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"Tree({tree_to_json(self)!r})"


EMPTY = Tree()


def reroot(child):
    """Extend an edge from a new root down to ``child`` (X * child(X))."""
    return Tree((child,))


def graft(a, b):
    """Merge the roots of two non-empty trees (entrywise product)."""
    if a.is_empty() or b.is_empty():
        raise ConfigurationError("graft children must both be non-empty")
    return Tree(a.children + b.children)


def canonicalize(tree):
    """Canonical encoding of a tree (children sorted recursively)."""
    return tree.key()


def evaluate_tree(tree, X):
    """Vector value of the tree polynomial at X.

    X may be one matrix (n, n) or a batch (B, n, n); the result matches
    ((n,) or (B, n)).
    """
    mat = X.values if hasattr(X, "values") else np.asarray(X)
    batched = mat.ndim == 3
    n = mat.shape[-1]
    if tree.is_empty():
        return np.ones(mat.shape[:-1][:1] + (n,)) if batched else np.ones(n)
    out = None
    for child in tree.children:
        sub = evaluate_tree(child, mat)
        val = np.einsum("bij,bj->bi", mat, sub) if batched else mat @ sub
        out = val if out is None else out * val
    return out


def trunk_value(tree, X):
    """Trunk scalar of a non-empty tree: (1/n) <T(X), 1>."""
    if tree.is_empty():
        raise ConfigurationError("the tree should be nonempty")
    val = evaluate_tree(tree, X)
    return val.mean(axis=-1)


@total_ordering
class Lumber:
    """A base tree scaled by a multiset of non-empty trunk trees."""

    __slots__ = ("base", "trunks", "_key")

    def __init__(self, base, trunks=()):
        for t in trunks:
            if t.is_empty():
                raise ConfigurationError("trunks must be non-empty trees")
        tr = tuple(sorted(trunks, key=lambda t: t._key))
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "trunks", tr)
        object.__setattr__(self, "_key", (base._key, tuple(t._key for t in tr)))

    def __setattr__(self, name, value):
        raise AttributeError("Lumber is immutable")

    @property
    def degree(self):
        return self.base._degree + sum(t._degree for t in self.trunks)

    def key(self):
        return self._key

    def __eq__(self, other):
        return isinstance(other, Lumber) and self._key == other._key

    def __lt__(self, other):
        return (self.degree, self._key) < (other.degree, other._key)

    def __hash__(self):
        return hash(self._key)

    def evaluate(self, X):
        out = evaluate_tree(self.base, X)
        for t in self.trunks:
            k = trunk_value(t, X)
            out = out * (k[..., None] if np.ndim(k) else k)
        return out

    def __repr__(self):
        return f"Lumber({tree_to_json(self.base)!r}, {[tree_to_json(t) for t in self.trunks]})"


class Forest:
    """Weighted sum of lumber, canonically merged."""

    __slots__ = ("terms",)

    def __init__(self, terms=()):
        merged = {}
        for coef, lum in terms:
            if coef == 0.0:
                continue
            prev = merged.get(lum._key)
            if prev is None:
                merged[lum._key] = [float(coef), lum]
            else:
                prev[0] += float(coef)
        cleaned = tuple(
            (c, l) for c, l in sorted(merged.values(), key=lambda cl: cl[1]._key) if c != 0.0
        )
        object.__setattr__(self, "terms", cleaned)

    def __setattr__(self, name, value):
        raise AttributeError("Forest is immutable")

    @classmethod
    def zero(cls):
        return cls(())

    @classmethod
    def ones(cls):
        return cls(((1.0, Lumber(EMPTY)),))

    @classmethod
    def of_tree(cls, tree, coef=1.0):
        return cls(((coef, Lumber(tree)),))

    @property
    def degree(self):
        return max((l.degree for _, l in self.terms), default=0)

    def __len__(self):
        return len(self.terms)

    def max_coefficient(self):
        return max((abs(c) for c, _ in self.terms), default=0.0)

    def __add__(self, other):
        return Forest(self.terms + other.terms)

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, c):
        return Forest(tuple((c * coef, lum) for coef, lum in self.terms))

    def xmul(self):
        """Multiply by X: reroot every base tree."""
        return Forest(
            tuple((coef, Lumber(reroot(lum.base), lum.trunks)) for coef, lum in self.terms)
        )

    def hadamard(self, other, term_cap=None):
        """Entrywise product of two forests."""
        out = []
        for c1, l1 in self.terms:
            for c2, l2 in other.terms:
                base = Tree(l1.base.children + l2.base.children)
                out.append((c1 * c2, Lumber(base, l1.trunks + l2.trunks)))
        if term_cap is not None and len(out) > term_cap:
            raise ResourceError(f"forest product exploded past {term_cap} raw terms")
        return Forest(tuple(out))

    def scalarize(self):
        """Symbolic (1/n) <F(X), 1>: a weighted sum of trunk products."""
        out = []
        for coef, lum in self.terms:
            trunks = lum.trunks if lum.base.is_empty() else lum.trunks + (lum.base,)
            out.append((coef, trunks))
        return ScalarForest(tuple(out))

    def evaluate(self, X):
        mat = X.values if hasattr(X, "values") else np.asarray(X)
        n = mat.shape[-1]
        shape = (mat.shape[0], n) if mat.ndim == 3 else (n,)
        out = np.zeros(shape)
        for coef, lum in self.terms:
            out += coef * lum.evaluate(mat)
        return out

    def __repr__(self):
        return f"Forest<{len(self.terms)} terms, degree {self.degree}>"


class ScalarForest:
    """Weighted sum of trunk-product monomials (scalar polynomials in X)."""

    __slots__ = ("terms",)

    def __init__(self, terms=()):
        merged = {}
        for coef, trunks in terms:
            if coef == 0.0:
                continue
            tr = tuple(sorted(trunks, key=lambda t: t._key))
            key = tuple(t._key for t in tr)
            prev = merged.get(key)
            if prev is None:
                merged[key] = [float(coef), tr]
            else:
                prev[0] += float(coef)
        object.__setattr__(
            self,
            "terms",
            tuple(
                (c, tr)
                for c, tr in sorted(
                    merged.values(), key=lambda ct: tuple(t._key for t in ct[1])
                )
                if c != 0.0
            ),
        )

    def __setattr__(self, name, value):
        raise AttributeError("ScalarForest is immutable")

    @classmethod
    def zero(cls):
        return cls(())

    @classmethod
    def const(cls, c):
        return cls(((c, ()),))

    def __add__(self, other):
        return ScalarForest(self.terms + other.terms)

    def scale(self, c):
        return ScalarForest(tuple((c * coef, tr) for coef, tr in self.terms))

    def times_forest(self, forest):
        out = []
        for sc, trunks in self.terms:
            for fc, lum in forest.terms:
                out.append((sc * fc, Lumber(lum.base, lum.trunks + trunks)))
        return Forest(tuple(out))

    def evaluate(self, X):
        mat = X.values if hasattr(X, "values") else np.asarray(X)
        total = 0.0
        for coef, trunks in self.terms:
            term = coef
            for t in trunks:
                term = term * trunk_value(t, mat)
            total = total + term
        return total

    def __len__(self):
        return len(self.terms)


def enumerate_trees(d):
    """All non-isomorphic rooted trees of degree (edge count) <= d."""
    if d < 0:
        raise ConfigurationError("degree must be >= 0")
    by_degree = [[EMPTY]]
    for e in range(1, d + 1):
        pool = [t for level in by_degree for t in level]  # degree < e
        pool.sort()
        found = []

        def extend(children, remaining, min_idx):
            if remaining == 0:
                found.append(Tree(tuple(children)))
                return
            for idx in range(min_idx, len(pool)):
                c = pool[idx]
                cost = 1 + c.degree
                if cost > remaining:
                    continue
                children.append(c)
                extend(children, remaining - cost, idx)
                children.pop()

        extend([], e, 0)
        by_degree.append(sorted(set(found)))
    return [t for level in by_degree for t in level]


def enumerate_lumber(d):
    """All non-isomorphic lumber of degree <= d, in deterministic order."""
    if d < 0:
        raise ConfigurationError("degree must be >= 0")
    if d > LUMBER_DEGREE_GUARD:
        raise ResourceError(
            f"lumber enumeration guarded at degree {LUMBER_DEGREE_GUARD}, got {d}"
        )
    trees = enumerate_trees(d)
    nonempty = [t for t in trees if not t.is_empty()]
    out = []

    def trunk_sets(remaining, min_idx, acc):
        yield tuple(acc)
        for idx in range(min_idx, len(nonempty)):
            t = nonempty[idx]
            if t.degree > remaining:
                continue
            acc.append(t)
            yield from trunk_sets(remaining - t.degree, idx, acc)
            acc.pop()

    for base in trees:
        for trunks in trunk_sets(d - base.degree, 0, []):
            out.append(Lumber(base, trunks))
    return sorted(set(out))


def tree_to_json(tree):
    """Nested encoding: "E", ["R", child], ["G", left, right]."""
    if tree.is_empty():
        return "E"
    branches = [["R", tree_to_json(c)] for c in tree.children]
    enc = branches[-1]
    for b in reversed(branches[:-1]):
        enc = ["G", b, enc]
    return enc


def tree_from_json(data):
    if data == "E":
        return EMPTY
    tag = data[0]
    if tag == "R":
        return reroot(tree_from_json(data[1]))
    if tag == "G":
        return graft(tree_from_json(data[1]), tree_from_json(data[2]))
    raise ConfigurationError(f"bad tree encoding {data!r}")


def forest_to_json(forest):
    return {
        "terms": [
            [coef, tree_to_json(l.base), [tree_to_json(t) for t in l.trunks]]
            for coef, l in forest.terms
        ]
    }


def forest_from_json(data):
    terms = []
    for coef, base, trunks in data["terms"]:
        terms.append(
            (float(coef), Lumber(tree_from_json(base), tuple(tree_from_json(t) for t in trunks)))
        )
    return Forest(tuple(terms))


def forest_dumps(forest):
    return json.dumps(forest_to_json(forest))


def forest_loads(s):
    return forest_from_json(json.loads(s))
