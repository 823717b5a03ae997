"""Entanglement concentration protocols as deterministic state machines.

Each protocol is written once against a *brancher*: a callable that receives
the records of a measurement and returns the ones to follow. Sampling follows
the single record picked by the next number of a random stream; exhaustive
enumeration follows all of them. A run is therefore a pure function of the
Schmidt pair and the stream, and :func:`enumerate_branches` visits exactly
the paths sampling can produce, each with its exact probability.

Qubit naming follows the usual textbook layout:

* qubit-assisted iterative scheme: ancilla ``A1``, shared pair ``(A2, B)``;
  the surviving pair is ``(A1, B)``.
* qubit-assisted POVM scheme: shared pair ``(A, B1)``, Bob's ancilla ``B2``.
* entanglement-assisted scheme: auxiliary pair ``(A1, A2)``, shared pair
  ``(A3, B)``; the surviving pair is ``(A1, B)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (
    BellKind,
    SchmidtPair,
    StateVector,
    apply_cnot,
    basis_state,
    bipartition_spectrum,
    cut_entanglement,
    default_party_labels,
    factor_out,
    make_cat_state,
    make_pair_state,
    pair_entanglement,
    qubit_state,
    schmidt_decompose_pair,
    tensor,
)
from .measurement import (
    CONCLUSIVE_MINUS,
    CONCLUSIVE_PLUS,
    MeasurementRecord,
    bell_branches,
    build_chi_povm,
    build_idp_povm,
    measure_z_branches,
    parity_branches,
    pick_index,
    povm_branches,
    select,
)

RESIDUAL_BETA_FLOOR = 1e-9

PROPOSAL1 = "proposal1"
PROPOSAL2 = "proposal2"
ENT_ASSISTED = "ent-assisted"
CAT = "cat"
SINGLE_PAIR_PROTOCOLS = (PROPOSAL1, PROPOSAL2, ENT_ASSISTED)
CAT_METHODS = (PROPOSAL1, PROPOSAL2)


class OutcomeKind(enum.Enum):
    Success = "Success"
    Residual = "Residual"
    Disentangled = "Disentangled"


@dataclass(frozen=True)
class TraceEntry:
    """One measurement in a run and the classical message it produces."""

    step: str
    actor: str
    qubits: tuple[str, ...]
    outcome: str
    probability: float
    announced_to: str

    def summary(self) -> str:
        return f"{self.step}[{','.join(self.qubits)}]={self.outcome}"


@dataclass(frozen=True)
class ProtocolOutcome:
    """Result of one protocol run.

    ``final_state`` holds only the qubits the parties keep sharing. For a
    success, ``target`` is the ideal maximally entangled state declared by
    ``bell``; for a residual, ``residual`` is its Schmidt pair.
    """

    kind: OutcomeKind
    final_state: StateVector
    trace: tuple[TraceEntry, ...] = ()
    bell: BellKind | None = None
    residual: SchmidtPair | None = None
    target: StateVector | None = None

    @property
    def probability(self) -> float:
        """Probability of this exact measurement path."""
        return math.prod(entry.probability for entry in self.trace)

    @property
    def path(self) -> tuple[str, ...]:
        return tuple(entry.outcome for entry in self.trace)

    @property
    def succeeded(self) -> bool:
        return self.kind is OutcomeKind.Success


@dataclass(frozen=True)
class Branch:
    probability: float
    outcome: ProtocolOutcome


@dataclass(frozen=True)
class RoundSummary:
    round_index: int
    pairs_in: int
    successes: int
    schmidt: SchmidtPair
    residual_pair: SchmidtPair | None


Brancher = Callable[[list[MeasurementRecord]], list[MeasurementRecord]]


def _follow_all(records: list[MeasurementRecord]) -> list[MeasurementRecord]:
    return records


def _sampler(rng) -> Brancher:
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))

    def follow_one(records: list[MeasurementRecord]) -> list[MeasurementRecord]:
        return [select(records, float(rng.random()))]

    return follow_one


def _entry(step, actor, rec: MeasurementRecord, announced_to) -> TraceEntry:
    return TraceEntry(step, actor, rec.qubits, rec.outcome_name, rec.probability, announced_to)


def cat_target(kind: BellKind, labels: Sequence[str], odd_party: str | None = None) -> StateVector:
    """Maximally entangled cat state named by ``kind`` on ``labels``.

    PhiPlus/PhiMinus are ``(|0...0> +/- |1...1>)/sqrt 2``. PsiPlus/PsiMinus
    are ``(|0 1...1> +/- |1 0...0>)/sqrt 2`` where the lone differing bit
    belongs to ``odd_party`` (default: the first label). With two labels these
    are the four Bell states.
    """
    labels = tuple(labels)
    n = len(labels)
    amps = np.zeros(2**n, dtype=np.complex128)
    sign = -1.0 if kind in (BellKind.PhiMinus, BellKind.PsiMinus) else 1.0
    if kind in (BellKind.PhiPlus, BellKind.PhiMinus):
        first, second = 0, 2**n - 1
    else:
        odd = labels.index(odd_party if odd_party is not None else labels[0])
        second = 1 << (n - 1 - odd)
        first = (2**n - 1) ^ second
    amps[first] = math.sqrt(0.5)
    amps[second] = sign * math.sqrt(0.5)
    return StateVector(labels, amps)


def _success(kind, shared, trace, odd_party=None) -> ProtocolOutcome:
    target = cat_target(kind, shared.labels, odd_party)
    return ProtocolOutcome(OutcomeKind.Success, shared, tuple(trace), bell=kind, target=target)


def _disentangled(shared, trace) -> ProtocolOutcome:
    return ProtocolOutcome(OutcomeKind.Disentangled, shared, tuple(trace))


def _pair_residual(shared, trace) -> ProtocolOutcome:
    a, b = shared.labels
    pair = schmidt_decompose_pair(shared, (a,), (b,)).as_pair()
    return ProtocolOutcome(OutcomeKind.Residual, shared, tuple(trace), residual=pair)


def _run(body, s: SchmidtPair, branch: Brancher, **kwargs) -> list[Branch]:
    return [Branch(o.probability, o) for o in body(s, branch, **kwargs)]


# -- qubit assisted, iterative -------------------------------------------------


def _proposal1(s: SchmidtPair, branch: Brancher) -> list[ProtocolOutcome]:
    if s.beta == 0.0:
        return [_disentangled(make_pair_state(s, ("A1", "B")), ())]
    chi = qubit_state(s.alpha, s.beta, "A1")
    state = tensor(chi, make_pair_state(s, ("A2", "B")))
    state = apply_cnot(state, "A1", "A2")
    outcomes = []
    for rec in branch(measure_z_branches(state, "A2")):
        shared, _ = factor_out(rec.post_state, ("A2",))
        trace = [_entry("measure-z", "Alice", rec, "Bob")]
        if rec.outcome_name == "1":
            outcomes.append(_success(BellKind.PsiPlus, shared, trace))
        else:
            outcomes.append(_pair_residual(shared, trace))
    return outcomes


def proposal1_single(s: SchmidtPair, rng) -> ProtocolOutcome:
    """One pass of the ancilla + CNOT + Z-measurement scheme on one pair.

    Alice prepares ``alpha|0> + beta|1>`` on ``A1``, applies CNOT(A1 -> A2)
    and measures ``A2``. Outcome 1 (probability ``2 alpha^2 beta^2``) leaves
    ``(A1, B)`` in Psi+; outcome 0 leaves the weaker pair with coefficients
    ``(alpha^2, beta^2)`` renormalized.
    """
    return _proposal1(s, _sampler(rng))[0]


def proposal1_iterate(
    s: SchmidtPair, n_pairs: int, max_rounds: int, rng
) -> list[RoundSummary]:
    """Repeat :func:`proposal1_single` on the failed sub-ensemble round by round.

    Stops after ``max_rounds``, when no pairs remain, or once the residual
    ``beta`` drops below 1e-9. Every pair of a round sees the same measurement
    statistics, so the branch records are computed once per round and each
    pair consumes one number from ``rng``, exactly as a fresh
    :func:`proposal1_single` call would.
    """
    if n_pairs < 1 or max_rounds < 1:
        raise ValueError("n_pairs and max_rounds must be at least 1")
    sampler_rng = np.random.default_rng(int(rng)) if isinstance(rng, (int, np.integer)) else rng
    rounds = []
    remaining, current = n_pairs, s
    for index in range(1, max_rounds + 1):
        outcomes = _proposal1(current, _follow_all)
        if len(outcomes) == 1 and outcomes[0].kind is OutcomeKind.Disentangled:
            rounds.append(RoundSummary(index, remaining, 0, current, None))
            break
        probs = [o.trace[0].probability for o in outcomes]
        successes = 0
        for _ in range(remaining):
            rand = float(sampler_rng.random())
            if not 0.0 <= rand < 1.0:
                raise ValueError(f"random stream produced {rand} outside [0, 1)")
            successes += outcomes[pick_index(probs, rand)].succeeded
        residual = next((o.residual for o in outcomes if o.residual is not None), None)
        rounds.append(RoundSummary(index, remaining, successes, current, residual))
        remaining -= successes
        if remaining == 0 or residual is None or residual.beta < RESIDUAL_BETA_FLOOR:
            break
        current = residual
    return rounds


# -- qubit assisted, POVM ------------------------------------------------------


def _proposal2(s: SchmidtPair, branch: Brancher) -> list[ProtocolOutcome]:
    if s.beta == 0.0:
        return [_disentangled(make_pair_state(s, ("A", "B1")), ())]
    state = tensor(make_pair_state(s, ("A", "B1")), basis_state("0", ("B2",)))
    state = apply_cnot(state, "B1", "B2")
    outcomes = []
    for rec in branch(povm_branches(state, ("B2",), build_idp_povm(s))):
        shared, _ = factor_out(rec.post_state, ("B2",))
        trace = [_entry("idp-povm", "Bob", rec, "Alice")]
        if rec.outcome_name == CONCLUSIVE_PLUS:
            outcomes.append(_success(BellKind.PhiPlus, shared, trace))
        elif rec.outcome_name == CONCLUSIVE_MINUS:
            outcomes.append(_success(BellKind.PhiMinus, shared, trace))
        else:
            outcomes.append(_disentangled(shared, trace))
    return outcomes


def proposal2_single(s: SchmidtPair, rng) -> ProtocolOutcome:
    """Bob's ancilla + CNOT + optimal unambiguous discrimination on one pair.

    Succeeds with probability ``2 beta^2``, leaving Phi+ or Phi- on
    ``(A, B1)``; the inconclusive outcome leaves the product ``|00>``.
    """
    return _proposal2(s, _sampler(rng))[0]


# -- entanglement assisted -----------------------------------------------------


def _ent_assisted(s: SchmidtPair, branch: Brancher) -> list[ProtocolOutcome]:
    if s.beta == 0.0:
        return [_disentangled(make_pair_state(s, ("A1", "B")), ())]
    state = tensor(make_pair_state(s, ("A1", "A2")), make_pair_state(s, ("A3", "B")))
    measured = ("A2", "A3")
    outcomes = []
    for parity in branch(parity_branches(state, measured)):
        first = _entry("parity", "Alice", parity, "Bob")
        if parity.outcome_name == "even":
            records = povm_branches(parity.post_state, measured, build_chi_povm(s))
            step = "chi-povm"
        else:
            records = bell_branches(parity.post_state, measured)
            step = "bell"
        for rec in branch(records):
            shared, _ = factor_out(rec.post_state, measured)
            trace = [first, _entry(step, "Alice", rec, "Bob")]
            if rec.outcome_name == CONCLUSIVE_PLUS:
                outcomes.append(_success(BellKind.PhiPlus, shared, trace))
            elif rec.outcome_name == CONCLUSIVE_MINUS:
                outcomes.append(_success(BellKind.PhiMinus, shared, trace))
            elif rec.outcome_name in ("PsiPlus", "PsiMinus"):
                outcomes.append(_success(BellKind(rec.outcome_name), shared, trace))
            else:
                outcomes.append(_disentangled(shared, trace))
    return outcomes


def entanglement_assisted_single(s: SchmidtPair, rng) -> ProtocolOutcome:
    """Alice's auxiliary copy of the pair + two-step measurement.

    Step one projects ``(A2, A3)`` on even or odd parity. Even parity
    (probability ``alpha^4 + beta^4``) is followed by the two-qubit
    unambiguous discrimination of :func:`build_chi_povm`; odd parity
    (probability ``2 alpha^2 beta^2``) by a Psi+/Psi- measurement, which
    always succeeds. Overall success probability is ``2 beta^2``.
    """
    return _ent_assisted(s, _sampler(rng))[0]


# -- cat states ----------------------------------------------------------------


def _cat(
    s: SchmidtPair,
    branch: Brancher,
    n_parties: int = 3,
    method: str = PROPOSAL1,
    actor: str | None = None,
    labels: Sequence[str] | None = None,
    allow_bipartite: bool = False,
) -> list[ProtocolOutcome]:
    if n_parties < (2 if allow_bipartite else 3):
        raise ValueError(f"cat concentration needs at least 3 parties, got {n_parties}")
    if method not in CAT_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {CAT_METHODS}")
    labels = default_party_labels(n_parties) if labels is None else tuple(labels)
    cat = make_cat_state(s, n_parties, labels)
    if actor is None:
        actor = labels[0] if method == PROPOSAL1 else labels[-1]
    cat.index_of(actor)
    if s.beta == 0.0:
        return [_disentangled(cat, ())]
    ancilla = actor + "'"
    outcomes = []
    if method == PROPOSAL1:
        state = tensor(qubit_state(s.alpha, s.beta, ancilla), cat)
        state = apply_cnot(state, ancilla, actor)
        for rec in branch(measure_z_branches(state, actor)):
            kept, _ = factor_out(rec.post_state, (actor,))
            shared = kept.relabeled({ancilla: actor}).reordered(labels)
            trace = [_entry("measure-z", actor, rec, "all")]
            if rec.outcome_name == "1":
                outcomes.append(_success(BellKind.PsiPlus, shared, trace, odd_party=actor))
            else:
                spectrum = bipartition_spectrum(shared, (actor,))
                pair = SchmidtPair.from_coefficients(spectrum[0], spectrum[1])
                outcomes.append(
                    ProtocolOutcome(OutcomeKind.Residual, shared, tuple(trace), residual=pair)
                )
    else:
        state = apply_cnot(tensor(cat, basis_state("0", (ancilla,))), actor, ancilla)
        for rec in branch(povm_branches(state, (ancilla,), build_idp_povm(s))):
            shared, _ = factor_out(rec.post_state, (ancilla,))
            trace = [_entry("idp-povm", actor, rec, "all")]
            if rec.outcome_name == CONCLUSIVE_PLUS:
                outcomes.append(_success(BellKind.PhiPlus, shared, trace))
            elif rec.outcome_name == CONCLUSIVE_MINUS:
                outcomes.append(_success(BellKind.PhiMinus, shared, trace))
            else:
                outcomes.append(_disentangled(shared, trace))
    return outcomes


def multipartite_concentrate(
    s: SchmidtPair,
    n_parties: int,
    method: str,
    rng,
    actor: str | None = None,
    labels: Sequence[str] | None = None,
    allow_bipartite: bool = False,
) -> ProtocolOutcome:
    """Concentrate ``alpha|0...0> + beta|1...1>`` into a GHZ-class state.

    Parameters
    ----------
    s : SchmidtPair
        Coefficients of the cat state.
    n_parties : int
        Number of parties, at least 3 unless ``allow_bipartite``.
    method : {"proposal1", "proposal2"}
        Which bipartite scheme the acting party runs locally.
        ``proposal1`` succeeds with probability ``2 alpha^2 beta^2`` and
        leaves ``(|0 1...1> + |1 0...0>)/sqrt 2`` with the actor's bit first;
        ``proposal2`` succeeds with probability ``2 beta^2`` and leaves
        ``(|0...0> +/- |1...1>)/sqrt 2``.
    rng
        Anything with a ``random()`` method returning floats in [0, 1).
    actor : str, optional
        Party that holds the ancilla. Defaults to the first party for
        ``proposal1`` and the last for ``proposal2``.
    labels : sequence of str, optional
        Party names; defaults to ``A, B, C, ...``.
    allow_bipartite : bool
        Permit ``n_parties == 2`` (used to check the reduction to the
        bipartite protocols).
    """
    return _cat(
        s,
        _sampler(rng),
        n_parties=n_parties,
        method=method,
        actor=actor,
        labels=labels,
        allow_bipartite=allow_bipartite,
    )[0]


_BODIES = {PROPOSAL1: _proposal1, PROPOSAL2: _proposal2, ENT_ASSISTED: _ent_assisted, CAT: _cat}


def enumerate_branches(protocol: str, s: SchmidtPair, **kwargs) -> list[Branch]:
    """Every measurement path of one protocol run with its exact probability.

    ``protocol`` is one of ``proposal1``, ``proposal2``, ``ent-assisted`` or
    ``cat``; the cat protocol takes the keyword arguments of
    :func:`multipartite_concentrate` (except ``rng``).
    """
    try:
        body = _BODIES[protocol]
    except KeyError:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {sorted(_BODIES)}") from None
    return _run(body, s, _follow_all, **kwargs)


def run_protocol(protocol: str, s: SchmidtPair, rng, **kwargs) -> ProtocolOutcome:
    """Sampled single run of any protocol accepted by :func:`enumerate_branches`."""
    try:
        body = _BODIES[protocol]
    except KeyError:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {sorted(_BODIES)}") from None
    return body(s, _sampler(rng), **kwargs)[0]


def success_probability(branches: Sequence[Branch]) -> float:
    return math.fsum(b.probability for b in branches if b.outcome.succeeded)


def shared_entanglement(outcome: ProtocolOutcome) -> float:
    """Single-pair entanglement left between the parties after a run.

    Two-qubit results use the Schmidt oracle directly; cat-form results use
    the cut between the first party and the rest.
    """
    state = outcome.final_state
    if state.n_qubits == 2:
        return pair_entanglement(state)
    return cut_entanglement(state, state.labels[:1])


__all__ = [
    "Branch",
    "CAT",
    "CAT_METHODS",
    "ENT_ASSISTED",
    "OutcomeKind",
    "PROPOSAL1",
    "PROPOSAL2",
    "ProtocolOutcome",
    "RESIDUAL_BETA_FLOOR",
    "RoundSummary",
    "SINGLE_PAIR_PROTOCOLS",
    "TraceEntry",
    "cat_target",
    "entanglement_assisted_single",
    "enumerate_branches",
    "multipartite_concentrate",
    "proposal1_iterate",
    "proposal1_single",
    "proposal2_single",
    "run_protocol",
    "shared_entanglement",
    "success_probability",
]
