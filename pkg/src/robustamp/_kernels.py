"""Hot numeric kernels with numba-jitted and pure-Python/NumPy variants.

Each kernel exists twice: ``<name>_py`` (reference path) and a jitted copy.
The public dispatchers pick the active path at import time via
:mod:`robustamp._backend`; both variants stay importable so tests and the
benchmark can compare them on identical inputs.
"""

import numpy as np

from ._backend import HAVE_NUMBA, njit

_DFACT = np.array(
    [1.0, 1.0, 3.0, 15.0, 105.0, 945.0, 10395.0, 135135.0, 2027025.0],
    dtype=np.float64,
)  # (2k-1)!! for multiplicity 2k


def _partition_moment_sum_py(eu, ev, nverts, n, rooted, gaussian, ntrees):
    """Sum over vertex-identification partitions of a (forest of) tree(s).

    ``eu``/``ev``: edge endpoint arrays. ``rooted``: vertex 0 carries a fixed
    label distinct labels are counted against n-1 remaining choices.
    Returns sum over set partitions of (#injective labelings) * prod of
    entry moments; the global n^(-E/2) edge scaling and trunk 1/n^ntrees
    normalization are applied here too.
    """
    E = len(eu)
    a = np.zeros(nverts, dtype=np.int64)  # restricted growth string
    total = 0.0
    mult = np.zeros(1024, dtype=np.int64)  # nblocks^2 keys, nverts <= 16
    while True:
        nblocks = int(a.max()) + 1
        # quotient edge multiplicities; key = bu*nblocks+bv with bu<=bv
        ok = True
        for k in range(E):
            bu = a[eu[k]]
            bv = a[ev[k]]
            if bu > bv:
                bu, bv = bv, bu
            mult[bu * nblocks + bv] += 1
        contrib = 1.0
        for k in range(E):
            bu = a[eu[k]]
            bv = a[ev[k]]
            if bu > bv:
                bu, bv = bv, bu
            key = bu * nblocks + bv
            m = mult[key]
            if m > 0:
                if m % 2 == 1:
                    ok = False
                elif gaussian:
                    contrib *= _DFACT[m // 2]
                mult[key] = 0
        if ok:
            # injective labelings of blocks
            lab = 1.0
            if rooted:
                for b in range(1, nblocks):
                    lab *= n - b
            else:
                for b in range(nblocks):
                    lab *= n - b
            total += lab * contrib
        # next restricted growth string
        i = nverts - 1
        while i > 0:
            mx = 0
            for j in range(i):
                if a[j] > mx:
                    mx = a[j]
            if a[i] <= mx:
                a[i] += 1
                for j in range(i + 1, nverts):
                    a[j] = 0
                break
            i -= 1
        if i == 0:
            break
    return total * float(n) ** (-(E / 2.0) - ntrees)


def _zero_rowsum_pass_py(s, priority):
    """One sequential row-fixing pass over the sign matrix ``s`` (in place).

    Zeroes |row sum| same-sign entries per row (chosen by ascending
    ``priority``), mirroring into the column. Returns cells changed.
    """
    n = s.shape[0]
    changed = 0
    for i in range(n):
        r = 0
        for j in range(n):
            r += s[i, j]
        if r == 0:
            continue
        sgn = 1 if r > 0 else -1
        need = r if r > 0 else -r
        cand = np.empty(n, dtype=np.int64)
        pr = np.empty(n, dtype=np.float64)
        m = 0
        for j in range(n):
            if s[i, j] == sgn:
                cand[m] = j
                pr[m] = priority[i, j]
                m += 1
        order = np.argsort(pr[:m])
        for t in range(need):
            j = cand[order[t]]
            s[i, j] = 0
            if j != i:
                s[j, i] = 0
                changed += 2
            else:
                changed += 1
    return changed


def _interval_sweep_py(values, ptr, idx, coef, lo, hi, nrm2, passes):
    """Sequential projection sweep over sparse interval constraints.

    Constraint c holds coefficients coef[ptr[c]:ptr[c+1]] on entries
    idx[...]; project onto lo[c] <= f <= hi[c] in place. Returns the max
    violation observed during the last pass.
    """
    ncons = len(ptr) - 1
    worst = 0.0
    for p in range(passes):
        worst = 0.0
        for c in range(ncons):
            b, e = ptr[c], ptr[c + 1]
            f = 0.0
            for k in range(b, e):
                f += coef[k] * values[idx[k]]
            viol = 0.0
            if f < lo[c]:
                viol = lo[c] - f
                lam = viol / nrm2[c]
                for k in range(b, e):
                    values[idx[k]] += lam * coef[k]
            elif f > hi[c]:
                viol = f - hi[c]
                lam = -viol / nrm2[c]
                for k in range(b, e):
                    values[idx[k]] += lam * coef[k]
            if viol > worst:
                worst = viol
    return worst


if HAVE_NUMBA:
    _partition_moment_sum_jit = njit(cache=True)(_partition_moment_sum_py)
    _zero_rowsum_pass_jit = njit(cache=True)(_zero_rowsum_pass_py)
    _interval_sweep_jit = njit(cache=True)(_interval_sweep_py)
else:  # pragma: no cover - exercised via ROBUSTAMP_NO_NUMBA
    _partition_moment_sum_jit = _partition_moment_sum_py
    _zero_rowsum_pass_jit = _zero_rowsum_pass_py
    _interval_sweep_jit = _interval_sweep_py


def partition_moment_sum(eu, ev, nverts, n, rooted, gaussian, ntrees=0):
    eu = np.ascontiguousarray(eu, dtype=np.int64)
    ev = np.ascontiguousarray(ev, dtype=np.int64)
    return _partition_moment_sum_jit(
        eu, ev, int(nverts), int(n), bool(rooted), bool(gaussian), int(ntrees)
    )


def zero_rowsum_pass(s, priority):
    return _zero_rowsum_pass_jit(s, priority)


def interval_sweep(values, ptr, idx, coef, lo, hi, nrm2, passes=1):
    return _interval_sweep_jit(values, ptr, idx, coef, lo, hi, nrm2, int(passes))
