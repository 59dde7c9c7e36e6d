"""AMP iterations with Onsager correction, state evolution and rounding."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DivergenceError, NumericalDegeneracyError

DENOISER_KINDS = ("polynomial", "relu", "tanh_scaled")
ARITIES = ("last_iterate_only", "all_iterates")


@dataclass(frozen=True)
class Denoiser:
    """One entrywise denoiser f^s applied to the stack (x^s, ..., x^0).

    polynomial / last_iterate_only: ``coefficients[m]`` multiplies x^m.
    polynomial / all_iterates: ``terms`` is ((coef, exponents), ...) with
    exponents indexed by iterate number 0..s.
    tanh_scaled: scale * tanh(gain * z) where z is the weighted sum of
    iterates (``weights`` indexed by iterate number; default: the last).
    """

    kind: str
    arity: str = "last_iterate_only"
    coefficients: tuple = ()
    terms: tuple = ()
    scale: float = 1.0
    gain: float = 1.0
    weights: tuple = ()

    def __post_init__(self):
        if self.kind not in DENOISER_KINDS:
            raise ConfigurationError(f"unknown denoiser kind {self.kind!r}")
        if self.arity not in ARITIES:
            raise ConfigurationError(f"unknown arity {self.arity!r}")
        if self.arity == "all_iterates" and self.kind == "relu":
            raise ConfigurationError("relu denoisers are last-iterate-only")

    def _z(self, its):
        if self.arity == "last_iterate_only" or not self.weights:
            return its[-1]
        z = np.zeros_like(its[-1])
        for j, w in enumerate(self.weights[: len(its)]):
            if w != 0.0:
                z = z + w * its[j]
        return z

    def evaluate(self, its):
        """Apply the denoiser to iterates its = [x^0, ..., x^s]."""
        if self.kind == "relu":
            return np.maximum(its[-1], 0.0)
        if self.kind == "tanh_scaled":
            return self.scale * np.tanh(self.gain * self._z(its))
        if self.arity == "last_iterate_only":
            x = its[-1]
            out = np.zeros_like(x)
            for m in reversed(range(len(self.coefficients))):
                out = out * x + self.coefficients[m]
            return out
        out = np.zeros_like(its[-1])
        for coef, expts in self.terms:
            term = np.full_like(its[-1], coef)
            for j, e in enumerate(expts):
                if e:
                    term = term * its[j] ** e
            out += term
        return out

    def derivative(self, its, j):
        """Entrywise partial derivative with respect to iterate number j."""
        s = len(its) - 1
        if self.kind == "relu":
            if j != s:
                return np.zeros_like(its[-1])
            return (its[-1] > 0).astype(np.float64)
        if self.kind == "tanh_scaled":
            if self.arity == "last_iterate_only" or not self.weights:
                w = 1.0 if j == s else 0.0
            else:
                w = self.weights[j] if j < len(self.weights) else 0.0
            if w == 0.0:
                return np.zeros_like(its[-1])
            th = np.tanh(self.gain * self._z(its))
            return self.scale * self.gain * w * (1.0 - th * th)
        if self.arity == "last_iterate_only":
            if j != s:
                return np.zeros_like(its[-1])
            x = its[-1]
            out = np.zeros_like(x)
            for m in reversed(range(1, len(self.coefficients))):
                out = out * x + m * self.coefficients[m]
            return out
        out = np.zeros_like(its[-1])
        for coef, expts in self.terms:
            e_j = expts[j] if j < len(expts) else 0
            if not e_j:
                continue
            term = np.full_like(its[-1], coef * e_j)
            for k, e in enumerate(expts):
                ek = e - 1 if k == j else e
                if ek:
                    term = term * its[k] ** ek
            out += term
        return out

    def poly_terms(self, s):
        """Multivariate monomials ((coef, exponents over x^0..x^s), ...)."""
        if self.kind != "polynomial":
            raise ConfigurationError("only polynomial denoisers expose terms")
        if self.arity == "all_iterates":
            return tuple((c, tuple(e) + (0,) * (s + 1 - len(e))) for c, e in self.terms)
        out = []
        for m, c in enumerate(self.coefficients):
            if c != 0.0:
                expts = [0] * (s + 1)
                expts[s] = m
                out.append((float(c), tuple(expts)))
        return tuple(out)


def poly1d(coefficients):
    """Univariate polynomial denoiser from an ascending coefficient list."""
    return Denoiser(kind="polynomial", coefficients=tuple(float(c) for c in coefficients))


def identity_denoiser():
    return poly1d([0.0, 1.0])


def relu_denoiser():
    return Denoiser(kind="relu")


@dataclass(frozen=True)
class DenoiserFamily:
    """Ordered denoisers f^0..f^{t-1} plus the polynomial degree cap."""

    steps: tuple
    max_poly_degree: int = 0

    def __post_init__(self):
        for d in self.steps:
            if not isinstance(d, Denoiser):
                raise ConfigurationError("steps must be Denoiser instances")

    def __len__(self):
        return len(self.steps)

    def step(self, s):
        return self.steps[s]

    def is_polynomial(self):
        return all(d.kind == "polynomial" for d in self.steps)


def power_iteration_family(t):
    return DenoiserFamily(steps=(identity_denoiser(),) * t, max_poly_degree=1)


def nnpca_relu_family(t):
    return DenoiserFamily(steps=(relu_denoiser(),) * t)


def polynomial_family(coefficients, t):
    """Same univariate polynomial at every step."""
    d = poly1d(coefficients)
    return DenoiserFamily(steps=(d,) * t, max_poly_degree=len(coefficients) - 1)


def sk_iamp_family(t, gain=0.8):
    """Incremental tanh family for Sherrington-Kirkpatrick optimization.

    Step 0 is the identity, so x^1 = X 1 is an effectively Gaussian start.
    Step s >= 1 applies tanh(beta_s * (x^1 + ... + x^s)) with beta_s =
    gain/sqrt(s), a desk-scale stand-in for the incremental AMP schedule;
    the accumulated sum of iterates is the vector to round.
    """
    steps = [identity_denoiser()]
    for s in range(1, t):
        weights = (0.0,) + (1.0,) * s  # exclude the all-ones x^0
        steps.append(
            Denoiser(
                kind="tanh_scaled",
                arity="all_iterates",
                gain=gain / math.sqrt(s),
                weights=weights,
            )
        )
    return DenoiserFamily(steps=tuple(steps))


@dataclass
class AmpTrace:
    """Iterates x^{-1}..x^t with per-step Onsager coefficient rows."""

    iterates: list = field(default_factory=list)  # [x^{-1}, x^0, ..., x^t]
    onsager: list = field(default_factory=list)  # onsager[s] = [b_{s,1}..b_{s,s}]
    normalization: float = 1.0

    @property
    def n(self):
        return len(self.iterates[0])

    @property
    def steps(self):
        return len(self.iterates) - 2

    def x(self, j):
        """Iterate x^j, j = -1..t."""
        return self.iterates[j + 1]

    def final(self):
        return self.iterates[-1]

    def v_amp(self):
        """Final iterate divided by the stored normalization."""
        return self.iterates[-1] / self.normalization

    def iterate_sum(self):
        """Sum of x^1..x^t: the accumulated output used by the SK preset."""
        return np.sum(self.iterates[2:], axis=0)

    def to_json_dict(self):
        return {
            "steps": self.steps,
            "n": self.n,
            "iterates": [list(map(float, v)) for v in self.iterates],
            "onsager": [[float(b) for b in row] for row in self.onsager],
            "normalization": self.normalization,
        }

    @classmethod
    def from_json_dict(cls, d):
        return cls(
            iterates=[np.asarray(v, dtype=np.float64) for v in d["iterates"]],
            onsager=[list(map(float, row)) for row in d["onsager"]],
            normalization=float(d.get("normalization", 1.0)),
        )


def onsager_coeff(its, fam, t, j):
    """Normalized divergence b_{t,j} of f^t with respect to iterate j.

    ``its`` is the iterate stack [x^0..x^t] (or an AmpTrace prefix).
    """
    if isinstance(its, AmpTrace):
        its = its.iterates[1:]
    if not 1 <= j <= t:
        raise IndexError(f"onsager index j={j} outside 1..{t}")
    stack = its[: t + 1]
    d = fam.step(t).derivative(stack, j)
    return float(d.mean())


DIVERGENCE_GUARD = 1e6


def amp_run(X, fam, t, normalize=False, norm_scale=None, se_samples=20000, se_seed=0):
    """Run t AMP steps on X from x^0 = all-ones.

    x^{s+1} = X f^s(x^s..x^0) - sum_{j=1..s} b_{s,j} f^{j-1}(x^{j-1}..x^0).
    With ``normalize``, the stored normalization is (1/n) E||x^t||^2 estimated
    from state evolution unless ``norm_scale`` is supplied (e.g. from a
    calibration table).
    """
    if t < 1:
        raise ConfigurationError("amp_run needs t >= 1")
    if len(fam) < t:
        raise ConfigurationError(f"family has {len(fam)} denoisers, need {t}")
    mat = X.values if hasattr(X, "values") else np.asarray(X)
    n = mat.shape[0]
    xm1 = np.zeros(n)
    x0 = np.ones(n)
    iterates = [xm1, x0]
    fvals = []  # fvals[j] = f^j(x^j..x^0)
    onsager_rows = []
    for s in range(t):
        stack = iterates[1 : s + 2]  # x^0..x^s
        f_s = fam.step(s).evaluate(stack)
        fvals.append(f_s)
        row = []
        corr = np.zeros(n)
        for j in range(1, s + 1):
            b = onsager_coeff(iterates[1:], fam, s, j)
            row.append(b)
            if b != 0.0:
                corr += b * fvals[j - 1]
        xnew = mat @ f_s - corr
        if not np.all(np.isfinite(xnew)) or np.abs(xnew).max() > DIVERGENCE_GUARD:
            raise DivergenceError(f"AMP diverged at step {s + 1}", step=s + 1)
        iterates.append(xnew)
        onsager_rows.append(row)
    norm = 1.0
    if normalize:
        if norm_scale is None:
            table = state_evolution(fam, t, mc_samples=se_samples, seed=se_seed)
            norm_scale = math.sqrt(table.Q[t - 1, t - 1])
        norm = float(norm_scale)
    return AmpTrace(iterates=iterates, onsager=onsager_rows, normalization=norm)


def recursion_residual(trace, X, fam):
    """Max relative residual of the stored recursion; 0 for a faithful run."""
    mat = X.values if hasattr(X, "values") else np.asarray(X)
    worst = 0.0
    its = trace.iterates
    for s in range(trace.steps):
        stack = its[1 : s + 2]
        f_s = fam.step(s).evaluate(stack)
        corr = np.zeros_like(f_s)
        for j in range(1, s + 1):
            fj = fam.step(j - 1).evaluate(its[1 : j + 1])
            corr += trace.onsager[s][j - 1] * fj
        pred = mat @ f_s - corr
        denom = np.linalg.norm(its[s + 2]) or 1.0
        worst = max(worst, np.linalg.norm(its[s + 2] - pred) / denom)
    return worst


@dataclass
class StateEvolutionTable:
    """Monte Carlo estimate of the state-evolution covariance Q (t x t)."""

    t: int
    Q: np.ndarray
    mc_samples: int
    seed: int = 0

    def sigma(self, j):
        """Standard deviation of U^j, j = 1..t."""
        return math.sqrt(max(self.Q[j - 1, j - 1], 0.0))


def state_evolution(fam, t, mc_samples=100000, seed=0, psd_tol=1e-8):
    """Estimate Q_{ij} = E[f^{i-1}(U^0..U^{i-1}) f^{j-1}(U^0..U^{j-1})].

    The Gaussian process U^1..U^t is built recursively: at stage s the prefix
    (U^1..U^s) is redrawn jointly from the current covariance and the new row
    of Q is averaged over the sample. U^0 is the constant 1.
    """
    if t < 0:
        raise ConfigurationError("state_evolution needs t >= 0")
    if t == 0:
        return StateEvolutionTable(t=0, Q=np.zeros((0, 0)), mc_samples=0, seed=seed)
    if len(fam) < t:
        raise ConfigurationError(f"family has {len(fam)} denoisers, need {t}")
    rng = np.random.Generator(np.random.Philox(key=[int(seed), 77]))
    M = int(mc_samples)
    Q = np.zeros((t, t))
    ones = np.ones(M)
    # stage 1: U^0 = 1 deterministic
    f0 = fam.step(0).evaluate([ones])
    Q[0, 0] = float((f0 * f0).mean())
    for s in range(1, t):
        # draw (U^1..U^s) ~ N(0, Q[:s,:s])
        w, V = np.linalg.eigh(Q[:s, :s])
        if w.min() < -psd_tol * max(1.0, w.max()):
            raise NumericalDegeneracyError(
                f"state evolution covariance lost PSD at stage {s}: {w.min()}"
            )
        A = V * np.sqrt(np.clip(w, 0.0, None))
        U = rng.standard_normal((M, s)) @ A.T
        stacks = [ones] + [U[:, j] for j in range(s)]  # U^0..U^s
        fv = [fam.step(j).evaluate(stacks[: j + 1]) for j in range(s + 1)]
        for j in range(1, s + 2):
            Q[s, j - 1] = Q[j - 1, s] = float((fv[s] * fv[j - 1]).mean())
    w = np.linalg.eigvalsh(Q)
    if w.min() < -psd_tol * max(1.0, w.max()):
        raise NumericalDegeneracyError(f"state evolution Q not PSD: min eig {w.min()}")
    return StateEvolutionTable(t=t, Q=Q, mc_samples=M, seed=seed)


def se_sample_iterates(table, fam, mc_samples, seed):
    """Fresh draws of (U^1..U^t) from a state-evolution table, with U^0 = 1."""
    t = table.t
    rng = np.random.Generator(np.random.Philox(key=[int(seed), 78]))
    w, V = np.linalg.eigh(table.Q)
    A = V * np.sqrt(np.clip(w, 0.0, None))
    U = rng.standard_normal((mc_samples, t)) @ A.T
    return [np.ones(mc_samples)] + [U[:, j] for j in range(t)]


@dataclass(frozen=True)
class ProblemSpec:
    """Feasible set and rounding map for the quadratic problem.

    nnpca rounds x -> x_+/||x_+||; sk rounds x -> sign(x)/sqrt(n). ``output``
    names the trace vector the pipeline rounds: the final iterate, or the
    accumulated iterate sum used by the incremental SK family.
    """

    kind: str
    output: str = ""

    def __post_init__(self):
        if self.kind not in ("nnpca", "sk"):
            raise ConfigurationError(f"unknown problem kind {self.kind!r}")
        if not self.output:
            object.__setattr__(
                self, "output", "iterate_sum" if self.kind == "sk" else "last_iterate"
            )
        if self.output not in ("last_iterate", "iterate_sum"):
            raise ConfigurationError(f"unknown output selector {self.output!r}")

    def output_vector(self, trace):
        if self.output == "iterate_sum":
            return trace.iterate_sum()
        return trace.v_amp()


def round_to_feasible(x, prob):
    """Project a raw vector onto the problem's feasible set."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if prob.kind == "nnpca":
        xp = np.maximum(x, 0.0)
        nrm = np.linalg.norm(xp)
        if nrm == 0.0:
            raise ValueError("nnpca rounding of a nonpositive vector is all-zero")
        return xp / nrm
    s = np.sign(x)
    s[s == 0] = 1.0
    return s / math.sqrt(n)


def objective(X, v):
    """Quadratic form v^T X v with a compensated final reduction."""
    mat = X.values if hasattr(X, "values") else np.asarray(X)
    v = np.asarray(v, dtype=np.float64)
    if mat.shape[0] != len(v):
        raise ConfigurationError("dimension mismatch in objective")
    w = mat @ v
    return math.fsum((v * w).tolist())
