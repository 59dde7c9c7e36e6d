"""Compile polynomial-denoiser AMP symbolically into forest polynomials."""

from ..errors import ConfigurationError, ResourceError
from .algebra import Forest, ScalarForest

DEFAULT_TERM_CAP = 20000


def _substitute(terms, iterate_forests, term_cap):
    """Evaluate multivariate polynomial terms at forest-valued arguments."""
    total = Forest.zero()
    for coef, expts in terms:
        acc = Forest.ones().scale(coef)
        for j, e in enumerate(expts):
            for _ in range(e):
                acc = acc.hadamard(iterate_forests[j], term_cap=term_cap)
        total = total + acc
        if len(total) > term_cap:
            raise ResourceError(f"forest compilation exceeded {term_cap} terms")
    return total


def _derivative_terms(terms, j):
    out = []
    for coef, expts in terms:
        e_j = expts[j]
        if not e_j:
            continue
        d = list(expts)
        d[j] = e_j - 1
        out.append((coef * e_j, tuple(d)))
    return tuple(out)


def compile_amp_forest(fam, t, term_cap=DEFAULT_TERM_CAP):
    """Forest F with F(X) == t-th AMP iterate, for polynomial denoisers.

    Onsager coefficients compile to weighted sums of trunks via symbolic
    derivatives of the step polynomials; degree is bounded by (2k)^t.
    """
    if t < 1:
        raise ConfigurationError("compile_amp_forest needs t >= 1")
    if len(fam) < t:
        raise ConfigurationError(f"family has {len(fam)} denoisers, need {t}")
    if not fam.is_polynomial():
        raise ConfigurationError("compile_amp_forest needs polynomial denoisers")
    iterate_forests = [Forest.ones()]  # x^0
    fvals = []  # compiled f^j(x^j..x^0)
    for s in range(t):
        terms = fam.step(s).poly_terms(s)
        f_s = _substitute(terms, iterate_forests, term_cap)
        fvals.append(f_s)
        new = f_s.xmul()
        for j in range(1, s + 1):
            dterms = _derivative_terms(terms, j)
            if not dterms:
                continue
            grad = _substitute(dterms, iterate_forests, term_cap)
            b = grad.scalarize()  # b_{s,j}: a weighted sum of trunks
            new = new - b.times_forest(fvals[j - 1])
        if len(new) > term_cap:
            raise ResourceError(f"forest compilation exceeded {term_cap} terms")
        iterate_forests.append(new)
    return iterate_forests[t]


def compile_amp_scalar(fam, t, term_cap=DEFAULT_TERM_CAP):
    """ScalarForest for (1/n) <x^t(X), 1>; used by analytic normalizers."""
    return compile_amp_forest(fam, t, term_cap=term_cap).scalarize()
