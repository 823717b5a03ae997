"""Projective measurements and POVMs acting on named qubits of a state.

Every measurement exists in two forms: ``*_branches`` returns one
:class:`MeasurementRecord` per outcome with nonzero probability (exhaustive
enumeration), and the sampling form picks one of those records from a
caller-supplied uniform number using cumulative intervals in outcome order.
Post-measurement states keep the measured qubits; use
:func:`concentrate.core.factor_out` to drop them once they are in a product
state with the rest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import NORM_TOL, ORACLE_TOL, SchmidtPair, StateVector
from .errors import DegenerateInputError, DimensionError, LabelError, PreconditionError

_SQRT_HALF = math.sqrt(0.5)

CONCLUSIVE_PLUS = "conclusive-plus"
CONCLUSIVE_MINUS = "conclusive-minus"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class MeasurementRecord:
    outcome_index: int
    outcome_name: str
    probability: float
    post_state: StateVector
    qubits: tuple[str, ...] = ()


class Povm:
    """Complete set of positive operators with square-root Kraus operators.

    Construction fails unless each element is Hermitian and positive
    semidefinite to within 1e-12 and the elements sum to the identity to
    within 1e-12.
    """

    def __init__(self, elements: Sequence, element_names: Sequence[str]) -> None:
        mats = [np.array(e, dtype=np.complex128) for e in elements]
        names = tuple(str(n) for n in element_names)
        if not mats or len(mats) != len(names):
            raise ValueError("need one name per POVM element")
        dim = mats[0].shape[0]
        if dim < 2 or dim & (dim - 1):
            raise DimensionError(f"POVM dimension must be a power of two, got {dim}")
        for name, m in zip(names, mats):
            if m.shape != (dim, dim):
                raise DimensionError(f"element {name!r} has shape {m.shape}, expected {(dim, dim)}")
            if np.max(np.abs(m - m.conj().T)) > NORM_TOL:
                raise ValueError(f"element {name!r} is not Hermitian")
            if np.min(np.linalg.eigvalsh(m)) < -NORM_TOL:
                raise ValueError(f"element {name!r} is not positive semidefinite")
        completeness = np.max(np.abs(sum(mats) - np.eye(dim)))
        if completeness > NORM_TOL:
            raise ValueError(f"elements sum to identity only within {completeness:.3e}")
        for m in mats:
            m.flags.writeable = False
        self.elements = tuple(mats)
        self.element_names = names
        self.kraus = tuple(_psd_sqrt(m) for m in mats)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def __len__(self) -> int:
        return len(self.elements)

    def __repr__(self) -> str:
        return f"Povm(dim={self.dim}, elements={list(self.element_names)})"


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    # Eigenvalues at rounding level are zeros; their square roots (~1e-8)
    # would otherwise leak weight into the orthogonal complement.
    floor = 64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(w))))
    w = np.where(w <= floor, 0.0, w)
    root = (v * np.sqrt(w)) @ v.conj().T
    root.flags.writeable = False
    return root


def pick_index(probabilities: Sequence[float], rand: float) -> int:
    """First index whose cumulative probability exceeds ``rand``.

    Rounding can leave the total just below one; ``rand`` beyond it falls
    into the last outcome.
    """
    cumulative = np.cumsum(probabilities)
    return min(int(np.searchsorted(cumulative, rand, side="right")), len(cumulative) - 1)


def select(records: Sequence[MeasurementRecord], rand: float) -> MeasurementRecord:
    if not 0.0 <= rand < 1.0:
        raise ValueError(f"rand must lie in [0, 1), got {rand}")
    return records[pick_index([r.probability for r in records], rand)]


def _front_matrix(state: StateVector, qubits: tuple[str, ...]) -> tuple[np.ndarray, tuple]:
    if len(set(qubits)) != len(qubits):
        raise LabelError(f"duplicate measured qubits {qubits}")
    for q in qubits:
        state.index_of(q)
    order = qubits + tuple(label for label in state.labels if label not in qubits)
    matrix = state.reordered(order).amplitudes.reshape(2 ** len(qubits), -1)
    return matrix, order


def measurement_branches(
    state: StateVector,
    qubits: Sequence[str],
    elements: Sequence[np.ndarray],
    kraus: Sequence[np.ndarray],
    names: Sequence[str],
) -> list[MeasurementRecord]:
    """Every outcome of a measurement on ``qubits`` with nonzero probability.

    Outcome ``i`` has probability ``<psi|E_i (x) I|psi>`` and leaves
    ``(K_i (x) I)|psi>`` renormalized.
    """
    qubits = tuple(qubits)
    dim = 2 ** len(qubits)
    for e in elements:
        if e.shape != (dim, dim):
            raise DimensionError(f"operator of shape {e.shape} on {len(qubits)} qubits")
    matrix, order = _front_matrix(state, qubits)
    records = []
    for index, (e, k, name) in enumerate(zip(elements, kraus, names)):
        prob = float(np.real(np.vdot(matrix, e @ matrix)))
        if prob <= 0.0:
            continue
        projected = k @ matrix
        if not np.any(projected):
            continue
        post = StateVector.normalized(order, projected.reshape(-1)).reordered(state.labels)
        records.append(MeasurementRecord(index, name, min(prob, 1.0), post, qubits))
    return records


_Z_PROJECTORS = (np.diag([1.0, 0.0]).astype(np.complex128), np.diag([0.0, 1.0]).astype(np.complex128))


def measure_z_branches(state: StateVector, qubit: str) -> list[MeasurementRecord]:
    return measurement_branches(state, (qubit,), _Z_PROJECTORS, _Z_PROJECTORS, ("0", "1"))


def measure_z(state: StateVector, qubit: str, rand: float) -> MeasurementRecord:
    """Von Neumann measurement of ``qubit`` in the computational basis.

    Outcome ``"0"`` is chosen when ``rand < p(0)``.
    """
    return select(measure_z_branches(state, qubit), rand)


def build_idp_povm(s: SchmidtPair) -> Povm:
    """Optimal unambiguous discrimination of ``alpha|0> +/- beta|1>``.

    ``conclusive-plus`` never fires on ``alpha|0> - beta|1>`` and
    ``conclusive-minus`` never fires on ``alpha|0> + beta|1>``; each input is
    identified with probability ``1 - (alpha**2 - beta**2) = 2 beta**2``.

    Raises
    ------
    DegenerateInputError
        If ``beta == 0`` (the two states coincide).
    """
    if s.beta == 0.0:
        raise DegenerateInputError("beta = 0: the two states are identical")
    a, b = s.alpha, s.beta
    scale = 1.0 / (2.0 * a * a)
    plus = scale * np.array([[b * b, a * b], [a * b, a * a]])
    minus = scale * np.array([[b * b, -a * b], [-a * b, a * a]])
    fail = np.array([[1.0 - (b * b) / (a * a), 0.0], [0.0, 0.0]])
    return Povm((plus, minus, fail), (CONCLUSIVE_PLUS, CONCLUSIVE_MINUS, INCONCLUSIVE))


def build_chi_povm(s: SchmidtPair) -> Povm:
    """Two-qubit POVM discriminating ``alpha1|00> +/- beta1|11>``.

    ``(alpha1, beta1)`` is ``(alpha**2, beta**2)`` renormalized. The qubit
    discrimination of :func:`build_idp_povm` acts on span{|00>, |11>} and the
    odd-parity subspace is assigned wholly to the inconclusive element.
    """
    if s.beta == 0.0:
        raise DegenerateInputError("beta = 0: the two states are identical")
    qubit_povm = build_idp_povm(SchmidtPair.from_coefficients(s.alpha**2, s.beta**2))
    even = [0, 3]
    elements = []
    for e in qubit_povm.elements:
        big = np.zeros((4, 4), dtype=np.complex128)
        big[np.ix_(even, even)] = e
        elements.append(big)
    elements[2] = elements[2] + np.diag([0.0, 1.0, 1.0, 0.0])
    return Povm(elements, qubit_povm.element_names)


def povm_branches(
    state: StateVector, qubits: Sequence[str], povm: Povm
) -> list[MeasurementRecord]:
    qubits = tuple(qubits)
    if povm.dim != 2 ** len(qubits):
        raise DimensionError(f"POVM of dimension {povm.dim} applied to {len(qubits)} qubits")
    return measurement_branches(state, qubits, povm.elements, povm.kraus, povm.element_names)


def apply_povm(
    state: StateVector, qubits: Sequence[str], povm: Povm, rand: float
) -> MeasurementRecord:
    return select(povm_branches(state, qubits, povm), rand)


_EVEN = np.diag([1.0, 0.0, 0.0, 1.0]).astype(np.complex128)
_ODD = np.diag([0.0, 1.0, 1.0, 0.0]).astype(np.complex128)


def _two_distinct(qubits: Sequence[str]) -> tuple[str, str]:
    qubits = tuple(qubits)
    if len(qubits) != 2 or qubits[0] == qubits[1]:
        raise LabelError(f"need two distinct qubits, got {qubits}")
    return qubits


def parity_branches(state: StateVector, qubits: Sequence[str]) -> list[MeasurementRecord]:
    qubits = _two_distinct(qubits)
    return measurement_branches(state, qubits, (_EVEN, _ODD), (_EVEN, _ODD), ("even", "odd"))


def measure_subspace_parity(
    state: StateVector, qubits: Sequence[str], rand: float
) -> MeasurementRecord:
    """Project two qubits onto span{|00>,|11>} ("even") or span{|01>,|10>} ("odd")."""
    return select(parity_branches(state, qubits), rand)


def _projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    return np.outer(v, v.conj())


_PSI_PLUS = _projector([0.0, _SQRT_HALF, _SQRT_HALF, 0.0])
_PSI_MINUS = _projector([0.0, _SQRT_HALF, -_SQRT_HALF, 0.0])


def bell_branches(state: StateVector, qubits: Sequence[str]) -> list[MeasurementRecord]:
    qubits = _two_distinct(qubits)
    matrix, _ = _front_matrix(state, qubits)
    even_weight = float(np.real(np.vdot(matrix, _EVEN @ matrix)))
    if even_weight > ORACLE_TOL:
        raise PreconditionError(
            f"incomplete Bell measurement needs odd-parity support; even weight {even_weight:.3e}"
        )
    projectors = (_PSI_PLUS, _PSI_MINUS)
    return measurement_branches(state, qubits, projectors, projectors, ("PsiPlus", "PsiMinus"))


def incomplete_bell_measure(
    state: StateVector, qubits: Sequence[str], rand: float
) -> MeasurementRecord:
    """Distinguish Psi+ from Psi- on two qubits known to have odd parity."""
    return select(bell_branches(state, qubits), rand)


__all__ = [
    "CONCLUSIVE_MINUS",
    "CONCLUSIVE_PLUS",
    "INCONCLUSIVE",
    "MeasurementRecord",
    "Povm",
    "apply_povm",
    "bell_branches",
    "build_chi_povm",
    "build_idp_povm",
    "incomplete_bell_measure",
    "measure_subspace_parity",
    "measure_z",
    "measure_z_branches",
    "measurement_branches",
    "parity_branches",
    "pick_index",
    "povm_branches",
    "select",
]
