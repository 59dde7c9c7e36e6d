"""Exact moment oracles for tree and trunk polynomials.

Expectations are labeling sums: expand T(X)_i over all vertex labelings,
group labelings by the induced vertex partition, keep quotient multigraphs
whose edges all have even multiplicity, and multiply entry moments. Exact
for both ensemble families at any n; cost is the Bell number of the vertex
count, so degrees are guarded.
"""

from ..errors import ResourceError
from .. import _kernels

TREE_DEGREE_GUARD = 6
VERTEX_GUARD = 13


def _collect_edges(tree, offset):
    """DFS edge list (parent, child); root gets id ``offset``."""
    edges = []
    counter = [offset]

    def walk(node, my_id):
        for child in node.children:
            counter[0] += 1
            cid = counter[0]
            edges.append((my_id, cid))
            walk(child, cid)

    walk(tree, offset)
    return edges, counter[0] + 1


def tree_coordinate_expectation(tree, spec, i=0):
    """E[T(X)_i] under the ensemble; independent of i by symmetry."""
    if tree.degree > TREE_DEGREE_GUARD:
        raise ResourceError(
            f"tree degree {tree.degree} above labeling-sum guard {TREE_DEGREE_GUARD}"
        )
    if tree.is_empty():
        return 1.0
    edges, nverts = _collect_edges(tree, 0)
    eu = [e[0] for e in edges]
    ev = [e[1] for e in edges]
    return _kernels.partition_moment_sum(
        eu, ev, nverts, spec.n, rooted=True, gaussian=spec.family == "gaussian"
    )


def trunk_product_expectation(trees, spec):
    """E[prod_i trunk(T_i)(X)] for a collection of non-empty trees."""
    trees = [t for t in trees if not t.is_empty()]
    if not trees:
        return 1.0
    eu, ev = [], []
    offset = 0
    for t in trees:
        edges, nxt = _collect_edges(t, offset)
        eu.extend(e[0] for e in edges)
        ev.extend(e[1] for e in edges)
        offset = nxt
    if offset > VERTEX_GUARD:
        raise ResourceError(
            f"trunk product labeling sum needs {offset} vertices, guard is {VERTEX_GUARD}"
        )
    return _kernels.partition_moment_sum(
        eu,
        ev,
        offset,
        spec.n,
        rooted=False,
        gaussian=spec.family == "gaussian",
        ntrees=len(trees),
    )


def lumber_pair_expectation(l1, l2, spec):
    """E[(1/n) <L1(X), L2(X)>] via the trunk-product oracle.

    The inner product of the base trees is itself a trunk (of their graft)
    unless one side is the empty tree.
    """
    trunks = list(l1.trunks) + list(l2.trunks)
    b1, b2 = l1.base, l2.base
    if b1.is_empty() and b2.is_empty():
        pass  # <1,1>/n = 1
    elif b1.is_empty():
        trunks.append(b2)
    elif b2.is_empty():
        trunks.append(b1)
    else:
        from .algebra import graft

        trunks.append(graft(b1, b2))
    return trunk_product_expectation(trunks, spec)
