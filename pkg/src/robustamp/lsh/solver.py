"""First-order feasibility solver: alternating projections on constraint sets.

One sweep = a few passes of sequential projections onto the linear
(in)equality intervals, then a projection of every PSD block onto the cone
(consensus-averaging any entries shared between blocks). Feasibility is
declared only by the independent residual audit; a violation plateau well
above tolerance yields an infeasible verdict.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from .basis import ONE


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 4000
    tolerance: float = 1e-6
    seed: int = 0
    linear_passes: int = 4
    check_every: int = 25
    plateau_checks: int = 8
    plateau_rel: float = 1e-3


@dataclass
class PseudoExpectation:
    """Solved moment matrix over the monomial basis plus residual report."""

    basis: object
    moment: np.ndarray
    entry_values: np.ndarray
    system: object
    residual_report: object
    iterations: int

    def pe(self, m1, m2=ONE):
        """pE of a product of two basis monomials."""
        i = self.basis.position(m1)
        j = self.basis.position(m2)
        return float(self.moment[i, j])

    def pe_functional(self, pairs):
        """pE of a sparse functional {(m1, m2): coef}."""
        return float(
            sum(
                c * self.moment[self.basis.position(a), self.basis.position(b)]
                for (a, b), c in pairs.items()
            )
        )

    def second_moment_matrix(self):
        """The n x n block pE[v v^T]."""
        n = self.system.n
        return np.array(self.moment[1 : n + 1, 1 : n + 1])

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.moment)[0])


@dataclass
class SolveResult:
    status: str  # feasible | infeasible | indeterminate
    pseudoexpectation: object
    best_violation: float
    iterations: int
    residual_trace: list = field(default_factory=list)
    wall_time: float = 0.0

    def is_feasible(self):
        return self.status == "feasible"


def _linear_arrays(system):
    ptr = [0]
    idx, coef, lo, hi = [], [], [], []
    for c in system.linear:
        idx.extend(c.ids.tolist())
        coef.extend(c.coefs.tolist())
        ptr.append(len(idx))
        lo.append(c.lo)
        hi.append(c.hi)
    ptr = np.asarray(ptr, dtype=np.int64)
    idx = np.asarray(idx, dtype=np.int64)
    coef = np.asarray(coef, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    nrm2 = np.zeros(len(system.linear))
    for k in range(len(system.linear)):
        seg = coef[ptr[k] : ptr[k + 1]]
        nrm2[k] = float(seg @ seg) or 1.0
    return ptr, idx, coef, lo, hi, nrm2


def _entry_multiplicity(system):
    counts = np.zeros(len(system.entries))
    for _, idx in system.blocks:
        np.add.at(counts, idx.reshape(-1), 1.0)
    counts[counts == 0] = 1.0
    return counts


def _psd_consensus(values, blocks, counts):
    acc = np.zeros_like(values)
    for _, idx in blocks:
        B = values[idx]
        B = 0.5 * (B + B.T)
        w, V = np.linalg.eigh(B)
        if w[0] < 0.0:
            B = (V * np.clip(w, 0.0, None)) @ V.T
        np.add.at(acc, idx.reshape(-1), B.reshape(-1))
    return acc / counts


def assemble_full_moment(system, values):
    """Dense moment matrix over the basis; entries outside the stored set
    (none in the shipped formulations) are completed from first moments."""
    basis = system.basis
    d = len(basis)
    mu = np.zeros(d)
    for k, mono in enumerate(basis.monomials):
        eid = system.entries.get(ONE, mono)
        mu[k] = values[eid] if eid is not None else 0.0
    P = np.outer(mu, mu)
    for eid, (m1, m2) in enumerate(system.entries.pairs):
        if m1[0] == "s" or m2[0] == "s":
            continue
        i = basis.position(m1)
        j = basis.position(m2)
        P[i, j] = P[j, i] = values[eid]
    return P


def solve_feasibility(system, cfg=None, init_values=None):
    """Search for an entry vector satisfying every constraint of the system.

    Returns a SolveResult; on success its pseudoexpectation carries the
    moment matrix (PSD within tolerance) and the residual audit. A
    violation plateau well above tolerance yields the infeasible verdict;
    exhausting iterations while still improving yields indeterminate.
    """
    cfg = cfg or SolverConfig()
    t0 = time.time()
    values = (
        np.array(init_values, dtype=np.float64)
        if init_values is not None
        else (
            system.init_values.copy()
            if system.init_values is not None
            else np.zeros(len(system.entries))
        )
    )
    ptr, idx, coef, lo, hi, nrm2 = _linear_arrays(system)
    counts = _entry_multiplicity(system)

    trace = []
    best = np.inf
    stall = 0
    status = "indeterminate"
    it = 0
    while it < cfg.max_iters:
        _kernels.interval_sweep(values, ptr, idx, coef, lo, hi, nrm2, cfg.linear_passes)
        values = _psd_consensus(values, system.blocks, counts)
        it += 1
        if it % cfg.check_every == 0 or it == cfg.max_iters:
            report = system.audit(values, tolerance=cfg.tolerance)
            viol = report.max_violation
            trace.append((it, viol))
            if viol <= cfg.tolerance:
                status = "feasible"
                break
            if viol > best * (1.0 - cfg.plateau_rel):
                stall += 1
            else:
                stall = 0
            best = min(best, viol)
            if stall >= cfg.plateau_checks and viol > 50 * cfg.tolerance:
                status = "infeasible"
                break

    report = system.audit(values, tolerance=cfg.tolerance)
    P = assemble_full_moment(system, values)
    if status == "feasible":
        mineig = float(np.linalg.eigvalsh(P)[0])
        scale = max(1.0, float(np.abs(P).max()))
        if report.max_violation > cfg.tolerance or mineig < -cfg.tolerance * scale:
            status = "indeterminate"
    pe = PseudoExpectation(
        basis=system.basis,
        moment=P,
        entry_values=values,
        system=system,
        residual_report=report,
        iterations=it,
    )
    return SolveResult(
        status=status,
        pseudoexpectation=pe,
        best_violation=min(best, report.max_violation),
        iterations=it,
        residual_trace=trace,
        wall_time=time.time() - t0,
    )
