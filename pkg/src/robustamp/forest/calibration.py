"""Monte Carlo calibration of lumber statistics and the reasonableness check."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..amp import amp_run
from ..ensembles import EnsembleSpec, sample_symmetric
from ..errors import CalibrationError, DivergenceError
from .algebra import (
    Lumber,
    enumerate_lumber,
    enumerate_trees,
    evaluate_tree,
    tree_from_json,
    tree_to_json,
)


def default_slack_growth(n):
    """The default slowly-growing s(n) in c_slack = eta / (s(n) N_L^2)."""
    return math.log(n)


@dataclass
class StatisticsTable:
    """Calibrated moments of (Z, v*) pairs plus slack and cap constants."""

    degree: int
    n: int
    family: str
    subgaussian_K: float
    t: int
    lumber_list: list
    trees: list
    pair_stats: np.ndarray
    pair_ses: np.ndarray
    vec_stats: np.ndarray
    vec_ses: np.ndarray
    normalization: float
    normalization_se: float
    eta: float
    s_value: float
    c_slack: float
    C_K: float
    norm_bound: float
    infinity_caps: np.ndarray
    mc_samples: int
    seed: int
    skipped: int = 0

    @property
    def n_lumber(self):
        return len(self.lumber_list)

    def lumber_index(self, lum):
        for k, other in enumerate(self.lumber_list):
            if other == lum:
                return k
        raise KeyError("lumber not in table")

    def to_json_dict(self):
        return {
            "degree": self.degree,
            "n": self.n,
            "family": self.family,
            "subgaussian_K": self.subgaussian_K,
            "t": self.t,
            "lumber": [
                [tree_to_json(l.base), [tree_to_json(tr) for tr in l.trunks]]
                for l in self.lumber_list
            ],
            "trees": [tree_to_json(t) for t in self.trees],
            "pair_stats": self.pair_stats.tolist(),
            "pair_ses": self.pair_ses.tolist(),
            "vec_stats": self.vec_stats.tolist(),
            "vec_ses": self.vec_ses.tolist(),
            "normalization": self.normalization,
            "normalization_se": self.normalization_se,
            "eta": self.eta,
            "s_value": self.s_value,
            "c_slack": self.c_slack,
            "C_K": self.C_K,
            "norm_bound": self.norm_bound,
            "infinity_caps": self.infinity_caps.tolist(),
            "mc_samples": self.mc_samples,
            "seed": self.seed,
            "skipped": self.skipped,
        }

    @classmethod
    def from_json_dict(cls, d):
        lumber = [
            Lumber(tree_from_json(b), tuple(tree_from_json(t) for t in trunks))
            for b, trunks in d["lumber"]
        ]
        return cls(
            degree=d["degree"],
            n=d["n"],
            family=d["family"],
            subgaussian_K=d["subgaussian_K"],
            t=d["t"],
            lumber_list=lumber,
            trees=[tree_from_json(t) for t in d["trees"]],
            pair_stats=np.asarray(d["pair_stats"]),
            pair_ses=np.asarray(d["pair_ses"]),
            vec_stats=np.asarray(d["vec_stats"]),
            vec_ses=np.asarray(d["vec_ses"]),
            normalization=d["normalization"],
            normalization_se=d["normalization_se"],
            eta=d["eta"],
            s_value=d["s_value"],
            c_slack=d["c_slack"],
            C_K=d["C_K"],
            norm_bound=d["norm_bound"],
            infinity_caps=np.asarray(d["infinity_caps"]),
            mc_samples=d["mc_samples"],
            seed=d["seed"],
            skipped=d.get("skipped", 0),
        )

    def dumps(self):
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, s):
        return cls.from_json_dict(json.loads(s))


def lumber_value_matrix(lumber_list, X):
    """Stack lumber vector values row-wise, sharing tree evaluations."""
    mat = X.values if hasattr(X, "values") else np.asarray(X)
    n = mat.shape[-1]
    cache = {}

    def tree_val(tree):
        key = tree.key()
        if key not in cache:
            if tree.is_empty():
                cache[key] = np.ones(n)
            else:
                cache[key] = evaluate_tree(tree, mat)
        return cache[key]

    rows = np.empty((len(lumber_list), n))
    for k, lum in enumerate(lumber_list):
        val = tree_val(lum.base)
        scal = 1.0
        for tr in lum.trunks:
            scal *= tree_val(tr).mean()
        rows[k] = scal * val
    return rows


def calibrate_statistics(
    fam,
    t,
    d,
    prob,
    espec,
    mc_samples,
    seed,
    eta,
    s_fn=None,
    C_K=None,
    norm_bound=5.0,
    max_skip_fraction=0.1,
):
    """Estimate pair/vector lumber statistics of (Z, v_AMP(Z)) by Monte Carlo.

    Fresh matrices are sampled per draw; AMP divergence skips the sample
    (calibration fails past ``max_skip_fraction``). The returned table
    carries c_slack = eta / (s(n) N_L^2), the per-tree infinity caps
    (5 C_K deg log n)^(2 deg), and the normalization making
    (1/n) E||v*||^2 = 1. Standard errors above c_slack/4 are refused.
    """
    if mc_samples < 2:
        raise CalibrationError("mc_samples must be >= 2")
    if isinstance(espec, int):
        espec = EnsembleSpec(n=espec)
    n = espec.n
    lumber_list = enumerate_lumber(d)
    trees = enumerate_trees(d)
    N = len(lumber_list)
    pair_sum = np.zeros((N, N))
    pair_sq = np.zeros((N, N))
    vec_sum = np.zeros(N)
    vec_sq = np.zeros(N)
    norm_sum = 0.0
    norm_sq = 0.0
    used = 0
    skipped = 0
    for m in range(mc_samples):
        Z = sample_symmetric(espec, (seed, m))
        try:
            trace = amp_run(Z, fam, t)
        except DivergenceError:
            skipped += 1
            continue
        x = trace.final()
        L = lumber_value_matrix(lumber_list, Z)
        P = (L @ L.T) / n
        u = (L @ x) / n
        r = float(x @ x) / n
        pair_sum += P
        pair_sq += P * P
        vec_sum += u
        vec_sq += u * u
        norm_sum += r
        norm_sq += r * r
        used += 1
    if used == 0 or skipped > max_skip_fraction * mc_samples:
        raise CalibrationError(
            f"calibration failed: {skipped}/{mc_samples} samples diverged"
        )
    pair_stats = pair_sum / used
    pair_var = np.maximum(pair_sq / used - pair_stats**2, 0.0)
    pair_ses = np.sqrt(pair_var / used)
    norm2 = norm_sum / used
    norm_se = math.sqrt(max(norm_sq / used - norm2**2, 0.0) / used)
    nu = math.sqrt(norm2)
    vec_stats = vec_sum / used / nu
    vec_var = np.maximum(vec_sq / used - (vec_sum / used) ** 2, 0.0)
    vec_ses = np.sqrt(vec_var / used) / nu

    s_value = float((s_fn or default_slack_growth)(n))
    c_slack = eta / (s_value * N * N)
    worst_se = max(pair_ses.max(), vec_ses.max() if N else 0.0)
    if worst_se > c_slack / 4.0:
        raise CalibrationError(
            f"standard error {worst_se:.3g} exceeds c_slack/4 = {c_slack / 4:.3g}; "
            "increase mc_samples or loosen the slack"
        )
    if C_K is None:
        C_K = 4.0 * espec.subgaussian_K**2
    caps = np.array(
        [
            (5.0 * C_K * tr.degree * math.log(n)) ** (2 * tr.degree) if tr.degree else 1.0
            for tr in trees
        ]
    )
    return StatisticsTable(
        degree=d,
        n=n,
        family=espec.family,
        subgaussian_K=espec.subgaussian_K,
        t=t,
        lumber_list=lumber_list,
        trees=trees,
        pair_stats=pair_stats,
        pair_ses=pair_ses,
        vec_stats=vec_stats,
        vec_ses=vec_ses,
        normalization=nu,
        normalization_se=norm_se / (2 * nu) if nu else 0.0,
        eta=eta,
        s_value=s_value,
        c_slack=c_slack,
        C_K=C_K,
        norm_bound=norm_bound,
        infinity_caps=caps,
        mc_samples=used,
        seed=seed if isinstance(seed, int) else int(seed[0]),
        skipped=skipped,
    )


@dataclass
class CheckResult:
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class ReasonablenessReport:
    """The four sample-quality checks with measured margins."""

    checks: dict = field(default_factory=dict)

    @property
    def overall(self):
        return all(c.passed for c in self.checks.values())

    def summary(self):
        lines = []
        for name, c in self.checks.items():
            lines.append(
                f"{'PASS' if c.passed else 'FAIL'} {name}: margin {c.margin:+.4g} {c.detail}"
            )
        lines.append(f"overall: {'reasonable' if self.overall else 'not reasonable'}")
        return "\n".join(lines)


def reasonableness_report(X, v_amp, stats):
    """Evaluate the four reasonable-sample checks for (X, v_amp).

    ``v_amp`` must already be scaled by the table normalization so that
    (1/n) E||v_amp||^2 = 1 under the calibrated distribution.
    """
    mat = X.values if hasattr(X, "values") else np.asarray(X)
    n = mat.shape[0]
    v = np.asarray(v_amp, dtype=np.float64)
    if len(v) != n:
        raise ValueError("dimension mismatch between X and v_amp")
    report = ReasonablenessReport()

    L = lumber_value_matrix(stats.lumber_list, mat)
    P = (L @ L.T) / n
    u = (L @ v) / n
    pair_dev = float(np.abs(P - stats.pair_stats).max())
    vec_dev = float(np.abs(u - stats.vec_stats).max())
    dev = max(pair_dev, vec_dev)
    report.checks["lumber_concentration"] = CheckResult(
        passed=dev <= stats.c_slack,
        margin=stats.c_slack - dev,
        detail=f"worst |stat - table| = {dev:.4g}, c_slack = {stats.c_slack:.4g}",
    )

    r = float(v @ v) / n
    tol = stats.eta / 48.0
    report.checks["v_norm"] = CheckResult(
        passed=abs(r - 1.0) <= tol,
        margin=tol - abs(r - 1.0),
        detail=f"(1/n)||v||^2 = {r:.4g}, window 1 +- {tol:.4g}",
    )

    worst_ratio = 0.0
    worst_detail = ""
    for tr, cap in zip(stats.trees, stats.infinity_caps):
        val = float(np.abs(evaluate_tree(tr, mat)).max()) ** 4
        if cap > 0 and val / cap > worst_ratio:
            worst_ratio = val / cap
            worst_detail = f"||T(X)||_inf^4 = {val:.4g} vs cap {cap:.4g}"
    report.checks["infinity_caps"] = CheckResult(
        passed=worst_ratio <= 1.0,
        margin=1.0 - worst_ratio,
        detail=worst_detail,
    )

    op2 = float(np.abs(np.linalg.eigvalsh(mat)).max()) ** 2
    report.checks["operator_norm"] = CheckResult(
        passed=op2 <= stats.norm_bound,
        margin=stats.norm_bound - op2,
        detail=f"||X||_op^2 = {op2:.4g}",
    )
    return report
