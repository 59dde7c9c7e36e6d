"""Compile robust / non-robust LStH constraint systems over moment entries.

The moment workspace is a flat vector of stored entries pE[m1*m2]. PSD
blocks are index matrices into that vector (the spec's "linear maps from
moment entries to square matrices"); every linear (in)equality is a sparse
functional with an interval target. Statistics windows are emitted only
when every monomial of the expanded polynomial is representable; anything
else lands in the dropped-constraint report, never silently.

Robust formulations:

* ``entrywise`` - the full degree-1 basis over Xhat entries, with the
  matching equalities W_j Xhat_ij = W_j Y_ij and the operator-norm LMI as
  a slack PSD block. Exact but large (moment dimension 1 + 2n + n(n+1)/2).
* ``aggregated`` - program variables R = Xhat 1 and E = Xhat (1 - W); the
  matching and norm constraints enter through their derived consequences
  R = Y W + E (closed against every basis monomial) and
  pE||E||^2 <= 5 sum(1 - W). Moment dimension 1 + 4n; this is the desk-
  scale default, and the form whose moments the recovery argument uses.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, ResourceError
from .basis import ONE, EntryTable, MonomialBasis, e_mono, r_mono, slack_mono, v_mono, w_mono, x_mono

BIG = 1e30


@dataclass(frozen=True)
class LshConfig:
    """Degree and toggles for the feasibility program."""

    mode: str = "robust"  # robust | nonrobust
    formulation: str = "aggregated"  # aggregated | entrywise (robust only)
    lumber_degree: int = 2
    norm_bound: float = 5.0
    include_caps: bool = True
    include_localized_budget: bool = True
    max_aggregated_n: int = 300
    max_entrywise_n: int = 80

    def __post_init__(self):
        if self.mode not in ("robust", "nonrobust"):
            raise ConfigurationError(f"unknown lsh mode {self.mode!r}")
        if self.formulation not in ("aggregated", "entrywise"):
            raise ConfigurationError(f"unknown formulation {self.formulation!r}")


@dataclass
class LinearConstraint:
    ids: np.ndarray
    coefs: np.ndarray
    lo: float
    hi: float
    tag: str
    label: str


@dataclass
class DroppedConstraint:
    tag: str
    label: str
    reason: str
    realized: float = float("nan")


@dataclass
class AuditReport:
    """Max violation per constraint class plus PSD block floors."""

    linear: dict
    psd_min_eig: dict
    tolerance: float

    @property
    def max_violation(self):
        worst = max(self.linear.values(), default=0.0)
        psd = max((max(0.0, -m) for m in self.psd_min_eig.values()), default=0.0)
        return max(worst, psd)

    def feasible(self):
        return self.max_violation <= self.tolerance

    def summary(self):
        parts = [f"{tag}: {v:.3g}" for tag, v in sorted(self.linear.items())]
        parts += [f"psd[{k}] >= {v:.3g}" for k, v in sorted(self.psd_min_eig.items())]
        return "; ".join(parts)


class ConstraintSystem:
    def __init__(self, n, eps, basis, cfg, stats=None):
        self.n = n
        self.eps = eps
        self.basis = basis
        self.cfg = cfg
        self.stats = stats
        self.entries = EntryTable()
        self.blocks = []  # (name, int index matrix into entries)
        self.linear = []
        self.dropped = []
        self.init_values = None

    # -- construction helpers -------------------------------------------
    def add_block(self, name, monomials):
        m = len(monomials)
        idx = np.empty((m, m), dtype=np.int64)
        for a in range(m):
            for b in range(a, m):
                eid = self.entries.add(monomials[a], monomials[b])
                idx[a, b] = idx[b, a] = eid
        self.blocks.append((name, idx))
        return idx

    def add_linear(self, pairs, lo, hi, tag, label):
        """pairs: dict entry-id -> coefficient."""
        ids = np.fromiter(pairs.keys(), dtype=np.int64)
        coefs = np.fromiter(pairs.values(), dtype=np.float64)
        self.linear.append(LinearConstraint(ids, coefs, lo, hi, tag, label))

    def drop(self, tag, label, reason, realized=float("nan")):
        self.dropped.append(DroppedConstraint(tag, label, reason, realized))

    # -- evaluation ------------------------------------------------------
    def moment_dimension(self):
        return len(self.basis)

    def entry_count(self):
        return len(self.entries)

    def audit(self, values, tolerance=1e-6):
        """Re-evaluate every constraint from scratch on an entry vector."""
        linear = {}
        for c in self.linear:
            f = float(values[c.ids] @ c.coefs)
            viol = max(c.lo - f, f - c.hi, 0.0)
            linear[c.tag] = max(linear.get(c.tag, 0.0), viol)
        psd = {}
        for name, idx in self.blocks:
            group = name.split(":")[0]
            w = np.linalg.eigvalsh(values[idx])
            psd[group] = min(psd.get(group, np.inf), float(w[0]))
        return AuditReport(linear=linear, psd_min_eig=psd, tolerance=tolerance)

    def witness_values(self, assignment):
        return self.entries.witness_values(assignment)


# ---------------------------------------------------------------------------
# statistic expansion helpers


def _tree_x_monomials(tree, n):
    """Expand k_T(Xhat) over entrywise x-monomials for degree <= 2 trees."""
    deg = tree.degree
    out = {}
    if deg == 1:
        for i in range(n):
            for j in range(n):
                key = (x_mono(i, j),)
                out[key] = out.get(key, 0.0) + 1.0 / n
        return out
    if deg == 2:
        kids = tree.children
        if len(kids) == 1:  # path i - a - j
            for a in range(n):
                for i in range(n):
                    for j in range(n):
                        key = tuple(sorted((x_mono(i, a), x_mono(a, j))))
                        out[key] = out.get(key, 0.0) + 1.0 / n
        else:  # star: root i with two leaves
            for i in range(n):
                for a in range(n):
                    for b in range(n):
                        key = tuple(sorted((x_mono(i, a), x_mono(i, b))))
                        out[key] = out.get(key, 0.0) + 1.0 / n
        return out
    raise ResourceError(f"trunk expansion implemented for degree <= 2, got {deg}")


def _tree_r_monomials(tree, n):
    """Expand k_T(Xhat) over R-aggregates: degree-1 and degree-2 trees only.

    k_R = (1/n) sum_a R_a; both degree-2 shapes collapse (by symmetry of
    Xhat) to (1/n) sum_a R_a^2.
    """
    deg = tree.degree
    out = {}
    if deg == 1:
        for a in range(n):
            out[(r_mono(a),)] = 1.0 / n
        return out
    if deg == 2:
        for a in range(n):
            out[(r_mono(a), r_mono(a))] = 1.0 / n
        return out
    return None


_EXPAND_CACHE = {}


def _expand_cached(tree, n):
    key = (tree.key(), n)
    if key not in _EXPAND_CACHE:
        _EXPAND_CACHE[key] = _tree_x_monomials(tree, n)
    return _EXPAND_CACHE[key]


def _product_expand(polys, size_guard=6_000_000):
    """Multiply monomial dicts; monomials concatenate (sorted)."""
    acc = {(): 1.0}
    for poly in polys:
        if len(acc) * len(poly) > size_guard:
            raise ResourceError("statistic expansion too large")
        nxt = {}
        for mono1, c1 in acc.items():
            for mono2, c2 in poly.items():
                key = tuple(sorted(mono1 + mono2))
                nxt[key] = nxt.get(key, 0.0) + c1 * c2
        acc = nxt
    return acc


def _pair_collection(l1, l2):
    """Trees whose trunk product equals (1/n) <L1(Xhat), L2(Xhat)>."""
    from ..forest.algebra import graft

    trees = list(l1.trunks) + list(l2.trunks)
    b1, b2 = l1.base, l2.base
    if b1.is_empty() and b2.is_empty():
        pass
    elif b1.is_empty():
        trees.append(b2)
    elif b2.is_empty():
        trees.append(b1)
    else:
        trees.append(graft(b1, b2))
    return trees


def _lumber_label(lum):
    from ..forest.algebra import tree_to_json

    return f"{tree_to_json(lum.base)}|{[tree_to_json(t) for t in lum.trunks]}"


# ---------------------------------------------------------------------------
# builders


def build_constraint_system(Y, eps, stats, cfg):
    """Compile the LStH system for observation Y at corruption budget eps."""
    if cfg.mode == "nonrobust":
        return _build_nonrobust(Y, eps, stats, cfg)
    n = Y.n
    if cfg.formulation == "aggregated":
        if n > cfg.max_aggregated_n:
            raise ResourceError(
                f"aggregated robust mode guarded at n <= {cfg.max_aggregated_n}, got {n}"
            )
        return _build_robust_aggregated(Y, eps, stats, cfg)
    if n > cfg.max_entrywise_n:
        raise ResourceError(
            f"entrywise robust mode guarded at n <= {cfg.max_entrywise_n}, got {n}"
        )
    return _build_robust_entrywise(Y, eps, stats, cfg)


def _emit_window(sys, poly, target, tag, label):
    """Emit a statistic window if every monomial has a stored entry."""
    c = sys.stats.c_slack
    E = sys.entries
    pairs = {}
    for mono, coef in poly.items():
        if len(mono) == 0:
            target = target - coef
            continue
        if len(mono) == 1:
            eid = E.get(ONE, mono[0])
        elif len(mono) == 2:
            eid = E.get(mono[0], mono[1])
        else:
            sys.drop(tag, label, f"monomial degree {len(mono)} above moment degree 2")
            return
        if eid is None:
            sys.drop(tag, label, "moment entry not representable in this basis")
            return
        pairs[eid] = pairs.get(eid, 0.0) + coef
    sys.add_linear(pairs, target - c, target + c, tag, label)


def _emit_common_robust(sys, Ymat, eps):
    """pE[1], Booleanity, budget, localized budget (shared by formulations)."""
    n = sys.n
    E = sys.entries
    sys.add_linear({E.get(ONE, ONE): 1.0}, 1.0, 1.0, "plumbing", "pE[1] = 1")
    for j in range(n):
        sys.add_linear(
            {E.get(w_mono(j), w_mono(j)): 1.0, E.get(ONE, w_mono(j)): -1.0},
            0.0,
            0.0,
            "robust",
            f"W_{j}^2 = W_{j}",
        )
    budget = {E.get(ONE, w_mono(j)): 1.0 for j in range(n)}
    sys.add_linear(budget, n - eps * n, BIG, "robust", "sum(1-W) <= eps n")
    if sys.cfg.include_localized_budget:
        for j in range(n):
            pairs = {E.get(w_mono(i), w_mono(j)): 1.0 for i in range(n)}
            ewj = E.get(ONE, w_mono(j))
            pairs[ewj] = pairs.get(ewj, 0.0) - (n - eps * n)
            sys.add_linear(pairs, 0.0, BIG, "robust", f"W_{j}-localized budget")


def _emit_vnorm(sys):
    n = sys.n
    E = sys.entries
    vnorm = {E.get(v_mono(i), v_mono(i)): 1.0 / n for i in range(n)}
    sys.add_linear(vnorm, 1.0, 1.0, "lsh", "(1/n)||v||^2 = 1")


def _build_robust_entrywise(Y, eps, stats, cfg):
    n = Y.n
    basis = MonomialBasis(n=n, mode="entrywise")
    sys = ConstraintSystem(n, eps, basis, cfg, stats)
    Ymat = Y.values

    sys.add_block("moment", list(basis.monomials))
    sidx = np.empty((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i, n):
            eid = sys.entries.add(ONE, slack_mono(i, j))
            sidx[i, j] = sidx[j, i] = eid
    sys.blocks.append(("norm_slack", sidx))

    E = sys.entries
    _emit_common_robust(sys, Ymat, eps)
    for j in range(n):
        ewj = E.get(ONE, w_mono(j))
        for i in range(n):
            sys.add_linear(
                {E.get(w_mono(j), x_mono(i, j)): 1.0, ewj: -float(Ymat[i, j])},
                0.0,
                0.0,
                "robust",
                f"W_{j} Xh_{i}{j} = W_{j} Y_{i}{j}",
            )
    _emit_vnorm(sys)

    lumber = stats.lumber_list
    for i in range(len(lumber)):
        for j in range(i, len(lumber)):
            label = f"pair <{_lumber_label(lumber[i])}, {_lumber_label(lumber[j])}>"
            target = float(stats.pair_stats[i, j])
            trees = _pair_collection(lumber[i], lumber[j])
            if not trees:
                sys.drop("lsh", label, "constant statistic (no program variables)", 1.0)
                continue
            if sum(t.degree for t in trees) > 2:
                sys.drop("lsh", label, "statistic degree above moment degree 2")
                continue
            try:
                poly = _product_expand([_expand_cached(t, n) for t in trees])
            except ResourceError as exc:
                sys.drop("lsh", label, str(exc))
                continue
            _emit_window(sys, poly, target, "lsh", label)

    for k, lum in enumerate(lumber):
        label = f"vec <{_lumber_label(lum)}, v>"
        target = float(stats.vec_stats[k])
        if lum.degree > 1:
            sys.drop("lsh", label, "statistic degree above moment degree 2")
            continue
        pairs = {}
        if lum.base.is_empty():
            trunk_poly = _product_expand([_expand_cached(t, n) for t in lum.trunks])
            for mono, coef in trunk_poly.items():
                for i in range(n):
                    key = mono + (v_mono(i),)
                    if len(key) == 1:
                        eid = E.get(ONE, key[0])
                    else:
                        eid = E.get(key[0], key[1])
                    pairs[eid] = pairs.get(eid, 0.0) + coef / n
        else:
            for i in range(n):
                for j in range(n):
                    eid = E.get(v_mono(i), x_mono(i, j))
                    pairs[eid] = pairs.get(eid, 0.0) + 1.0 / n
        sys.add_linear(pairs, target - stats.c_slack, target + stats.c_slack, "lsh", label)

    if cfg.include_caps:
        for tree, cap in zip(stats.trees, stats.infinity_caps):
            if tree.is_empty():
                continue
            if tree.degree > 1:
                sys.drop(
                    "lsh",
                    f"coordinate cap for tree degree {tree.degree}",
                    "degree-2 weakened caps cover degree-1 trees only",
                )
                continue
            bound = math.sqrt(cap)
            for i in range(n):
                pairs = {}
                for j in range(n):
                    for k2 in range(n):
                        eid = E.get(x_mono(i, j), x_mono(i, k2))
                        pairs[eid] = pairs.get(eid, 0.0) + 1.0
                sys.add_linear(pairs, -BIG, bound, "lsh", f"cap pE[(Xh 1)_{i}^2]")

    nb = cfg.norm_bound
    for i in range(n):
        for j in range(i, n):
            pairs = {sidx[i, j]: 1.0}
            for a in range(n):
                eid = E.get(x_mono(i, a), x_mono(a, j))
                pairs[eid] = pairs.get(eid, 0.0) + 1.0
            target = nb if i == j else 0.0
            sys.add_linear(pairs, target, target, "norm", f"slack consensus ({i},{j})")

    sys.init_values = _entrywise_init(sys, Ymat, eps)
    return sys


def _entrywise_init(sys, Ymat, eps):
    n = sys.n
    E = sys.entries
    vals = np.zeros(len(E))
    w0 = 1.0 - eps
    vals[E.get(ONE, ONE)] = 1.0
    for i in range(n):
        vals[E.get(v_mono(i), v_mono(i))] = 1.0
    for j in range(n):
        vals[E.get(ONE, w_mono(j))] = w0
        vals[E.get(w_mono(j), w_mono(j))] = w0
        for i in range(n):
            if i != j:
                vals[E.get(w_mono(i), w_mono(j))] = w0 * w0
    for i in range(n):
        for j in range(i, n):
            vals[E.get(ONE, x_mono(i, j))] = Ymat[i, j]
    for j in range(n):
        for i in range(n):
            vals[E.get(w_mono(j), x_mono(i, j))] = w0 * Ymat[i, j]
    C = Ymat @ Ymat
    for i in range(n):
        for j in range(i, n):
            target = sys.cfg.norm_bound if i == j else 0.0
            vals[E.get(ONE, slack_mono(i, j))] = target - C[i, j]
    return vals


def _build_robust_aggregated(Y, eps, stats, cfg):
    n = Y.n
    basis = MonomialBasis(n=n, mode="aggregated")
    sys = ConstraintSystem(n, eps, basis, cfg, stats)
    Ymat = Y.values

    sys.add_block("moment", list(basis.monomials))
    E = sys.entries
    _emit_common_robust(sys, Ymat, eps)
    _emit_vnorm(sys)

    # matching consequence: R_i = sum_a Y_ia W_a + E_i, closed against every
    # basis monomial so all stored moments respect the identity.
    for i in range(n):
        base = {r_mono(i): 1.0, e_mono(i): -1.0}
        for m in basis.monomials:
            pairs = {}
            pairs[E.get(r_mono(i), m)] = 1.0
            eid = E.get(e_mono(i), m)
            pairs[eid] = pairs.get(eid, 0.0) - 1.0
            for a in range(n):
                ya = float(Ymat[i, a])
                if ya != 0.0:
                    eid = E.get(w_mono(a), m)
                    pairs[eid] = pairs.get(eid, 0.0) - ya
            sys.add_linear(pairs, 0.0, 0.0, "robust", f"(R - YW - E)_{i} x {m}")

    # norm consequences: corrupted-column energy and the row-aggregate trace
    nb = cfg.norm_bound
    epairs = {E.get(e_mono(i), e_mono(i)): 1.0 for i in range(n)}
    for j in range(n):
        eid = E.get(ONE, w_mono(j))
        epairs[eid] = epairs.get(eid, 0.0) + nb
    sys.add_linear(epairs, -BIG, nb * n, "norm", "||E||^2 <= 5 sum(1-W)")
    rtrace = {E.get(r_mono(i), r_mono(i)): 1.0 for i in range(n)}
    sys.add_linear(rtrace, -BIG, nb * n, "norm", "||R||^2 <= 5 n")

    # lumber statistics in the R-aggregate language
    lumber = stats.lumber_list
    for i in range(len(lumber)):
        for j in range(i, len(lumber)):
            label = f"pair <{_lumber_label(lumber[i])}, {_lumber_label(lumber[j])}>"
            target = float(stats.pair_stats[i, j])
            trees = _pair_collection(lumber[i], lumber[j])
            if not trees:
                sys.drop("lsh", label, "constant statistic (no program variables)", 1.0)
                continue
            polys = [_tree_r_monomials(t, n) for t in trees]
            if any(p is None for p in polys) or sum(t.degree for t in trees) > 2:
                sys.drop("lsh", label, "statistic degree above moment degree 2")
                continue
            _emit_window(sys, _product_expand(polys), target, "lsh", label)

    for k, lum in enumerate(lumber):
        label = f"vec <{_lumber_label(lum)}, v>"
        target = float(stats.vec_stats[k])
        if lum.degree > 1:
            sys.drop("lsh", label, "statistic degree above moment degree 2")
            continue
        pairs = {}
        if lum.base.is_empty():
            polys = [_tree_r_monomials(t, n) for t in lum.trunks]
            trunk_poly = _product_expand(polys)
            for mono, coef in trunk_poly.items():
                for i in range(n):
                    key = mono + (v_mono(i),)
                    eid = E.get(ONE, key[0]) if len(key) == 1 else E.get(key[0], key[1])
                    pairs[eid] = pairs.get(eid, 0.0) + coef / n
        else:  # base R: (1/n) sum_i pE[v_i R_i]
            for i in range(n):
                eid = E.get(v_mono(i), r_mono(i))
                pairs[eid] = pairs.get(eid, 0.0) + 1.0 / n
        sys.add_linear(pairs, target - stats.c_slack, target + stats.c_slack, "lsh", label)

    if cfg.include_caps:
        for tree, cap in zip(stats.trees, stats.infinity_caps):
            if tree.is_empty():
                continue
            if tree.degree > 1:
                sys.drop(
                    "lsh",
                    f"coordinate cap for tree degree {tree.degree}",
                    "degree-2 weakened caps cover degree-1 trees only",
                )
                continue
            bound = math.sqrt(cap)
            for i in range(n):
                sys.add_linear(
                    {E.get(r_mono(i), r_mono(i)): 1.0},
                    -BIG,
                    bound,
                    "lsh",
                    f"cap pE[R_{i}^2]",
                )

    sys.init_values = _aggregated_init(sys, Ymat, eps)
    return sys


def _aggregated_init(sys, Ymat, eps):
    n = sys.n
    E = sys.entries
    vals = np.zeros(len(E))
    w0 = 1.0 - eps
    vals[E.get(ONE, ONE)] = 1.0
    r0 = w0 * (Ymat @ np.ones(n))
    for i in range(n):
        vals[E.get(v_mono(i), v_mono(i))] = 1.0
        vals[E.get(ONE, r_mono(i))] = r0[i]
        vals[E.get(r_mono(i), r_mono(i))] = r0[i] * r0[i] + 0.5
    for j in range(n):
        vals[E.get(ONE, w_mono(j))] = w0
        vals[E.get(w_mono(j), w_mono(j))] = w0
        for i in range(j + 1, n):
            vals[E.get(w_mono(i), w_mono(j))] = w0 * w0
    for i in range(n):
        for j in range(n):
            vals[E.get(r_mono(i), w_mono(j))] = r0[i] * w0
    return vals


def _build_nonrobust(Y, eps, stats, cfg):
    n = Y.n
    basis = MonomialBasis(n=n, mode="nonrobust")
    sys = ConstraintSystem(n, eps, basis, cfg, stats)
    vs = [v_mono(i) for i in range(n)]
    sys.add_block("moment", [ONE] + vs)
    E = sys.entries
    sys.add_linear({E.get(ONE, ONE): 1.0}, 1.0, 1.0, "plumbing", "pE[1] = 1")
    _emit_vnorm(sys)

    c = stats.c_slack
    lumber = stats.lumber_list
    # vector statistics: lumber evaluated numerically at the observed Y
    for k, lum in enumerate(lumber):
        val = lum.evaluate(Y.values)
        target = float(stats.vec_stats[k])
        pairs = {E.get(ONE, vs[i]): float(val[i]) / n for i in range(n)}
        sys.add_linear(
            pairs, target - c, target + c, "lsh", f"vec <{_lumber_label(lum)}, v>"
        )
    # pair statistics carry no program variables once Xhat == Y is observed
    for i in range(len(lumber)):
        for j in range(i, len(lumber)):
            realized = float(
                np.dot(lumber[i].evaluate(Y.values), lumber[j].evaluate(Y.values)) / n
            )
            sys.drop(
                "lsh",
                f"pair <{_lumber_label(lumber[i])}, {_lumber_label(lumber[j])}>",
                "no Xhat variables in non-robust basis; realized value recorded",
                realized,
            )
    opnorm2 = float(np.abs(np.linalg.eigvalsh(Y.values)).max() ** 2)
    sys.drop(
        "norm",
        "operator-norm LMI",
        "no Xhat variables in non-robust basis; realized ||Y||_op^2 recorded",
        opnorm2,
    )
    vals = np.zeros(len(E))
    vals[E.get(ONE, ONE)] = 1.0
    for i in range(n):
        vals[E.get(vs[i], vs[i])] = 1.0
    sys.init_values = vals
    return sys


def witness_assignment(system, X, clean_cols, v):
    """Integral assignment: Xhat = X, W = clean indicators, v as given.

    In the aggregated formulation the derived variables are filled in as
    R = X 1 and E = X (1 - W)."""
    n = system.n
    assign = {ONE: 1.0}
    for i in range(n):
        assign[v_mono(i)] = float(v[i])
    mode = system.basis.mode
    if mode == "nonrobust":
        return assign
    Xmat = X.values if hasattr(X, "values") else np.asarray(X)
    clean = np.asarray(clean_cols, dtype=bool)
    for j in range(n):
        assign[w_mono(j)] = 1.0 if clean[j] else 0.0
    if mode == "entrywise":
        for i in range(n):
            for j in range(i, n):
                assign[x_mono(i, j)] = float(Xmat[i, j])
        C = Xmat @ Xmat
        for i in range(n):
            for j in range(i, n):
                target = system.cfg.norm_bound if i == j else 0.0
                assign[slack_mono(i, j)] = target - float(C[i, j])
    else:
        R = Xmat @ np.ones(n)
        Evec = Xmat @ (1.0 - clean.astype(np.float64))
        for i in range(n):
            assign[r_mono(i)] = float(R[i])
            assign[e_mono(i)] = float(Evec[i])
    return assign
