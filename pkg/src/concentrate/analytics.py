"""Closed-form probabilities, yields and conservation checks.

These evaluators never touch the simulator except in
:func:`conservation_check`, which weights simulated branch states by their
exact probabilities. Series quantities are evaluated with mpmath at a working
precision chosen so that every term stays resolvable next to the running sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath

from .core import SchmidtPair
from .errors import DegenerateInputError
from .protocols import (
    CAT,
    ENT_ASSISTED,
    PROPOSAL1,
    PROPOSAL2,
    enumerate_branches,
    shared_entanglement,
)

# Beyond this working precision, terms smaller than 10**-MAX_DPS relative to
# the sum are treated as converged.
MAX_DPS = 60_000
_GUARD_DIGITS = 30


def optimal_fraction(s: SchmidtPair) -> float:
    """Optimal yield of maximally entangled pairs per input pair, ``2 beta^2``."""
    return 2.0 * s.beta**2


def residual_schmidt(s: SchmidtPair) -> SchmidtPair:
    """Coefficients left after a failed qubit-assisted round.

    ``(alpha^2, beta^2) / sqrt(alpha^4 + beta^4)``, canonicalized.
    """
    if s.beta == 0.0:
        raise DegenerateInputError("beta = 0 has no residual pair")
    return SchmidtPair.from_coefficients(s.alpha**2, s.beta**2)


def conclusive_prob_chi(s: SchmidtPair) -> float:
    """Conclusive probability of the two-qubit discrimination, ``2 b^4 / (a^4 + b^4)``."""
    if s.beta == 0.0:
        raise DegenerateInputError("beta = 0: nothing to discriminate")
    a4, b4 = s.alpha**4, s.beta**4
    return 2.0 * b4 / (a4 + b4)


def analytic_success_probability(protocol: str, s: SchmidtPair, method: str | None = None) -> float:
    """Closed-form single-run success probability of ``protocol``.

    The qubit-assisted POVM scheme uses the unambiguous-discrimination bound
    ``1 - <u+|u->`` with overlap ``alpha^2 - beta^2``; the entanglement
    assisted scheme combines its two parity branches.
    """
    if protocol == CAT:
        if method not in (PROPOSAL1, PROPOSAL2):
            raise ValueError(f"cat needs method proposal1 or proposal2, got {method!r}")
        protocol = method
    a2, b2 = s.alpha**2, s.beta**2
    if protocol == PROPOSAL1:
        return 2.0 * a2 * b2
    if s.beta == 0.0:
        return 0.0
    if protocol == PROPOSAL2:
        return 1.0 - (a2 - b2)
    if protocol == ENT_ASSISTED:
        return (a2 * a2 + b2 * b2) * conclusive_prob_chi(s) + 2.0 * a2 * b2
    raise ValueError(f"unknown protocol {protocol!r}")


def analytic_branch_probabilities(
    protocol: str, s: SchmidtPair, method: str | None = None
) -> dict[tuple[str, ...], float]:
    """Closed-form probability of every measurement path, keyed like ``ProtocolOutcome.path``."""
    if protocol == CAT:
        protocol = method
    a2, b2 = s.alpha**2, s.beta**2
    if protocol == PROPOSAL1:
        return {("0",): a2 * a2 + b2 * b2, ("1",): 2.0 * a2 * b2}
    if protocol == PROPOSAL2:
        return {
            ("conclusive-plus",): b2,
            ("conclusive-minus",): b2,
            ("inconclusive",): a2 - b2,
        }
    if protocol == ENT_ASSISTED:
        return {
            ("even", "conclusive-plus"): b2 * b2,
            ("even", "conclusive-minus"): b2 * b2,
            ("even", "inconclusive"): a2 * a2 - b2 * b2,
            ("odd", "PsiPlus"): a2 * b2,
            ("odd", "PsiMinus"): a2 * b2,
        }
    raise ValueError(f"unknown protocol {protocol!r}")


@dataclass(frozen=True)
class YieldCurve:
    """Round-by-round yield of the iterated qubit-assisted scheme.

    ``terms[k]`` is the fraction of the original ensemble converted in round
    ``k + 1`` and ``cumulative_fractions[k]`` the running total.
    ``partial_sums[m - 1]`` is the sum ``I_m`` of the first ``m`` terms of
    the normalized series in ``x = beta / alpha``, which tends to one;
    ``remainder_bounds[m - 1] = x**(4 (2**m - 1))`` bounds ``1 - I_m``.
    Sequence values are mpmath numbers at ``dps`` digits.
    """

    x: float
    terms: tuple
    partial_sums: tuple
    cumulative_fractions: tuple
    remainder_bounds: tuple
    limit: float
    dps: int
    degenerate: bool = False

    def fractions(self) -> list[float]:
        return [float(f) for f in self.cumulative_fractions]


def _working_dps(x, k_rounds: int) -> int:
    digits = 4 * (2**k_rounds - 1) * float(-mpmath.log10(x))
    return int(min(MAX_DPS, math.ceil(digits) + _GUARD_DIGITS))


def yield_series(s: SchmidtPair, k_rounds: int) -> YieldCurve:
    """Evaluate the iterated yield after ``1..k_rounds`` rounds.

    Round ``k`` converts ``2 a_k b_k / prod_{i=2..k}(a_i + b_i)`` of the
    original ensemble, with ``a_i = alpha**(2**i)`` and ``b_i = beta**(2**i)``.
    The normalized series is accumulated separately from running products
    ``prod (1 + x**(2**(i+1)))`` so the two evaluations can be checked
    against each other.

    At ``alpha == beta`` every residual pair is already maximal; the
    degenerate curve reports a yield of one from the first round on.
    """
    if k_rounds < 1:
        raise ValueError("k_rounds must be at least 1")
    if s.beta == 0.0:
        raise DegenerateInputError("beta = 0: nothing to concentrate")
    if s.is_maximal:
        ones = tuple(mpmath.mpf(1) for _ in range(k_rounds))
        zeros = tuple(mpmath.mpf(0) for _ in range(k_rounds))
        return YieldCurve(1.0, (mpmath.mpf(1),) + zeros[1:], ones, ones, zeros, 1.0, mpmath.mp.dps, True)

    with mpmath.workdps(15):
        dps = _working_dps(mpmath.mpf(s.beta) / mpmath.mpf(s.alpha), k_rounds)
    with mpmath.workdps(dps):
        alpha, beta = mpmath.mpf(s.alpha), mpmath.mpf(s.beta)
        norm = mpmath.sqrt(alpha**2 + beta**2)
        alpha, beta = alpha / norm, beta / norm
        x = beta / alpha

        terms, fractions = [], []
        a, b = alpha**2, beta**2
        denominator = mpmath.mpf(1)
        total = mpmath.mpf(0)
        for k in range(1, k_rounds + 1):
            if k > 1:
                a, b = a * a, b * b
                denominator *= a + b
            term = 2 * a * b / denominator
            total += term
            terms.append(+term)
            fractions.append(+total)

        partial, bounds = [], []
        y = x**4
        numerator = mpmath.mpf(1)
        product = mpmath.mpf(1)
        running = mpmath.mpf(0)
        for m in range(1, k_rounds + 1):
            product *= 1 + y
            running += numerator / product
            partial.append(+running)
            bounds.append(x ** (4 * (2**m - 1)))
            numerator *= y
            y = y * y

    return YieldCurve(
        x=float(x),
        terms=tuple(terms),
        partial_sums=tuple(partial),
        cumulative_fractions=tuple(fractions),
        remainder_bounds=tuple(bounds),
        limit=optimal_fraction(s),
        dps=dps,
    )


def iterate_schedule(s: SchmidtPair, k_rounds: int, beta_floor: float = 1e-9) -> list[SchmidtPair]:
    """Schmidt pairs seen in rounds ``1..k``, stopping once ``beta < beta_floor``."""
    schedule = [s]
    while len(schedule) < k_rounds:
        nxt = residual_schmidt(schedule[-1])
        if nxt.beta < beta_floor:
            break
        schedule.append(nxt)
    return schedule


@dataclass(frozen=True)
class ConservationReport:
    protocol: str
    e_before: float
    e_after: float

    @property
    def deviation(self) -> float:
        return abs(self.e_before - self.e_after)

    def holds(self, tol: float = 1e-12) -> bool:
        return self.deviation <= tol


def conservation_check(s: SchmidtPair, protocol: str, **kwargs) -> ConservationReport:
    """Compare ``2 beta^2`` with the branch-averaged entanglement after one run.

    ``protocol`` is ``proposal1``, ``proposal2``, ``ent-assisted`` or ``cat``
    (the latter taking ``n_parties`` and ``method`` keywords).
    """
    branches = enumerate_branches(protocol, s, **kwargs)
    e_after = math.fsum(b.probability * shared_entanglement(b.outcome) for b in branches)
    return ConservationReport(protocol, optimal_fraction(s), e_after)


__all__ = [
    "ConservationReport",
    "MAX_DPS",
    "YieldCurve",
    "analytic_branch_probabilities",
    "analytic_success_probability",
    "conclusive_prob_chi",
    "conservation_check",
    "iterate_schedule",
    "optimal_fraction",
    "residual_schmidt",
    "yield_series",
]
