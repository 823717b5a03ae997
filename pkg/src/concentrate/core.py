"""Dense state vectors over labeled qubits.

Amplitudes are stored big-endian: the first label is the most significant bit
of the basis index, so ``StateVector(("A", "B"), v)[0b10]`` is the amplitude of
``|1>_A |0>_B``. All values are immutable; every operation returns a new state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CapacityError,
    DegenerateInputError,
    LabelError,
    NormalizationError,
    NotProductError,
    UnsupportedPartitionError,
)

NORM_TOL = 1e-12
ORACLE_TOL = 1e-10
MAX_QUBITS = 12

_SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True)
class SchmidtPair:
    """Schmidt coefficients of ``alpha|00> + beta|11>`` with ``beta <= alpha``.

    Use :meth:`from_coefficients` for arbitrary (unnormalized, unordered)
    input; the plain constructor only validates. ``swapped`` records whether
    canonicalization exchanged the two inputs.
    """

    alpha: float
    beta: float
    swapped: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        a, b = float(self.alpha), float(self.beta)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"Schmidt coefficients must be finite, got ({a}, {b})")
        if not (0.0 < a <= 1.0) or not (0.0 <= b < 1.0):
            raise ValueError(f"need alpha in (0, 1] and beta in [0, 1), got ({a}, {b})")
        if abs(a * a + b * b - 1.0) > NORM_TOL:
            raise ValueError(f"alpha^2 + beta^2 = {a * a + b * b!r}, expected 1")
        if b > a:
            raise ValueError(
                f"beta={b} exceeds alpha={a}; use SchmidtPair.from_coefficients to canonicalize"
            )
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @classmethod
    def from_coefficients(cls, a: float, b: float) -> "SchmidtPair":
        """Normalize ``(a, b)`` and order it so the smaller value is ``beta``."""
        a, b = float(a), float(b)
        if a < 0 or b < 0:
            raise ValueError(f"coefficients must be nonnegative, got ({a}, {b})")
        norm = math.hypot(a, b)
        if norm == 0.0 or not math.isfinite(norm):
            raise ValueError(f"cannot normalize ({a}, {b})")
        a, b = a / norm, b / norm
        swapped = b > a
        if swapped:
            a, b = b, a
        # hypot rounding can leave a^2 + b^2 a few ulps off; pull alpha back.
        a = math.sqrt(max(0.0, 1.0 - b * b)) if b > 0 else 1.0
        if b > a:
            b = a
        return cls(a, b, swapped=swapped)

    @classmethod
    def from_alpha_sq(cls, alpha_sq: float) -> "SchmidtPair":
        if not 0.0 <= alpha_sq <= 1.0:
            raise ValueError(f"alpha_sq must lie in [0, 1], got {alpha_sq}")
        return cls.from_coefficients(math.sqrt(alpha_sq), math.sqrt(1.0 - alpha_sq))

    @classmethod
    def maximal(cls) -> "SchmidtPair":
        return cls(_SQRT_HALF, _SQRT_HALF)

    @property
    def x(self) -> float:
        """Ratio ``beta / alpha`` in ``[0, 1]``."""
        return self.beta / self.alpha

    @property
    def is_product(self) -> bool:
        return self.beta == 0.0

    @property
    def is_maximal(self) -> bool:
        return abs(self.alpha - self.beta) <= NORM_TOL

    def require_entangled(self) -> None:
        if self.beta == 0.0:
            raise DegenerateInputError("beta = 0: the pair is a product state")


class BellKind(enum.Enum):
    PhiPlus = "PhiPlus"
    PhiMinus = "PhiMinus"
    PsiPlus = "PsiPlus"
    PsiMinus = "PsiMinus"


_BELL_AMPLITUDES = {
    BellKind.PhiPlus: (_SQRT_HALF, 0.0, 0.0, _SQRT_HALF),
    BellKind.PhiMinus: (_SQRT_HALF, 0.0, 0.0, -_SQRT_HALF),
    BellKind.PsiPlus: (0.0, _SQRT_HALF, _SQRT_HALF, 0.0),
    BellKind.PsiMinus: (0.0, _SQRT_HALF, -_SQRT_HALF, 0.0),
}


class StateVector:
    """Normalized pure state of 1 to 12 labeled qubits.

    Parameters
    ----------
    labels : sequence of str
        Distinct qubit names; the first is the most significant bit.
    amplitudes : array_like
        ``2**len(labels)`` complex amplitudes, normalized to within 1e-12.
    """

    __slots__ = ("_labels", "_amps")

    def __init__(self, labels: Sequence[str], amplitudes) -> None:
        labels = tuple(str(label) for label in labels)
        _check_labels(labels)
        amps = np.array(amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 2 ** len(labels):
            raise ValueError(
                f"{len(labels)} qubits need {2 ** len(labels)} amplitudes, got {amps.shape[0]}"
            )
        if not np.all(np.isfinite(amps)):
            raise NormalizationError("amplitudes contain NaN or Inf")
        norm_sq = float(np.vdot(amps, amps).real)
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise NormalizationError(f"squared norm is {norm_sq!r}, expected 1")
        amps.flags.writeable = False
        self._labels = labels
        self._amps = amps

    @classmethod
    def normalized(cls, labels: Sequence[str], amplitudes) -> "StateVector":
        """Build a state from an arbitrary nonzero vector by rescaling it."""
        amps = np.array(amplitudes, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0.0 or not np.isfinite(norm):
            raise NormalizationError("cannot normalize a zero or non-finite vector")
        return cls(labels, amps / norm)

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amps

    @property
    def n_qubits(self) -> int:
        return len(self._labels)

    def __len__(self) -> int:
        return self._amps.shape[0]

    def __getitem__(self, index) -> complex:
        return complex(self._amps[index])

    def index_of(self, label: str) -> int:
        try:
            return self._labels.index(label)
        except ValueError:
            raise LabelError(f"unknown qubit label {label!r}; state has {self._labels}") from None

    def as_tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one length-2 axis per qubit, in label order."""
        return self._amps.reshape((2,) * self.n_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self._amps))

    def reordered(self, labels: Sequence[str]) -> "StateVector":
        """Same physical state with qubits listed in a different order."""
        labels = tuple(labels)
        if sorted(labels) != sorted(self._labels):
            raise LabelError(f"label set mismatch: {labels} vs {self._labels}")
        if labels == self._labels:
            return self
        axes = [self._labels.index(label) for label in labels]
        return StateVector(labels, np.transpose(self.as_tensor(), axes).reshape(-1))

    def relabeled(self, mapping: dict[str, str]) -> "StateVector":
        return StateVector([mapping.get(label, label) for label in self._labels], self._amps)

    def ket(self, precision: int = 4) -> str:
        """Human-readable ket expansion, skipping zero amplitudes."""
        terms = []
        n = self.n_qubits
        for index, amp in enumerate(self._amps):
            if abs(amp) < 10.0 ** (-precision - 2):
                continue
            coeff = f"{amp.real:.{precision}g}" if amp.imag == 0 else f"({amp:.{precision}g})"
            terms.append(f"{coeff}|{index:0{n}b}>")
        return " + ".join(terms) + " on " + ",".join(self._labels)

    def __repr__(self) -> str:
        return f"StateVector({self.ket()})"


def _check_labels(labels: tuple[str, ...]) -> None:
    if not 1 <= len(labels) <= MAX_QUBITS:
        raise CapacityError(f"need 1..{MAX_QUBITS} qubits, got {len(labels)}")
    if len(set(labels)) != len(labels):
        raise LabelError(f"duplicate qubit labels in {labels}")


def basis_state(bits: str, labels: Sequence[str]) -> StateVector:
    """Computational basis state, e.g. ``basis_state("01", ("A", "B"))``."""
    labels = tuple(labels)
    if len(bits) != len(labels) or set(bits) - {"0", "1"}:
        raise ValueError(f"bit string {bits!r} does not match labels {labels}")
    amps = np.zeros(2 ** len(labels), dtype=np.complex128)
    amps[int(bits, 2)] = 1.0
    return StateVector(labels, amps)


def qubit_state(amp0: complex, amp1: complex, label: str) -> StateVector:
    return StateVector.normalized((label,), (amp0, amp1))


def bell_state(kind: BellKind, labels: Sequence[str]) -> StateVector:
    return StateVector(labels, _BELL_AMPLITUDES[BellKind(kind)])


def make_pair_state(s: SchmidtPair, labels: Sequence[str] = ("A", "B")) -> StateVector:
    """``alpha|00> + beta|11>`` on two labeled qubits."""
    labels = tuple(labels)
    if len(labels) != 2:
        raise ValueError(f"a pair state needs two labels, got {labels}")
    return StateVector(labels, (s.alpha, 0.0, 0.0, s.beta))


def default_party_labels(n_parties: int) -> tuple[str, ...]:
    return tuple(chr(ord("A") + i) for i in range(n_parties))


def make_cat_state(
    s: SchmidtPair, n_parties: int, labels: Sequence[str] | None = None
) -> StateVector:
    """``alpha|0...0> + beta|1...1>`` shared by ``n_parties`` qubits (2 to 10)."""
    if not 2 <= n_parties <= 10:
        raise ValueError(f"n_parties must lie in [2, 10], got {n_parties}")
    labels = default_party_labels(n_parties) if labels is None else tuple(labels)
    if len(labels) != n_parties:
        raise ValueError(f"expected {n_parties} labels, got {labels}")
    amps = np.zeros(2**n_parties, dtype=np.complex128)
    amps[0] = s.alpha
    amps[-1] = s.beta
    return StateVector(labels, amps)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Kronecker product with labels of ``a`` followed by those of ``b``."""
    collision = set(a.labels) & set(b.labels)
    if collision:
        raise LabelError(f"label collision: {sorted(collision)}")
    if a.n_qubits + b.n_qubits > MAX_QUBITS:
        raise CapacityError(
            f"{a.n_qubits} + {b.n_qubits} qubits exceeds capacity {MAX_QUBITS}"
        )
    return StateVector(a.labels + b.labels, np.kron(a.amplitudes, b.amplitudes))


def tensor_all(states: Iterable[StateVector]) -> StateVector:
    states = list(states)
    out = states[0]
    for other in states[1:]:
        out = tensor(out, other)
    return out


def apply_cnot(state: StateVector, control: str, target: str) -> StateVector:
    """Flip ``target`` on every basis state whose ``control`` bit is 1."""
    if control == target:
        raise LabelError(f"control and target are both {control!r}")
    c, t = state.index_of(control), state.index_of(target)
    psi = state.as_tensor().copy()
    where = [slice(None)] * state.n_qubits
    where[c] = 1
    # Fixing the control axis removes it, shifting later axes down by one.
    t_axis = t if t < c else t - 1
    psi[tuple(where)] = np.flip(psi[tuple(where)], axis=t_axis)
    return StateVector(state.labels, psi.reshape(-1))


def _split_matrix(state: StateVector, left: Sequence[str]) -> tuple[np.ndarray, tuple, tuple]:
    left = tuple(left)
    for label in left:
        state.index_of(label)
    if len(set(left)) != len(left):
        raise LabelError(f"duplicate labels in {left}")
    right = tuple(label for label in state.labels if label not in left)
    ordered = state.reordered(left + right)
    return ordered.amplitudes.reshape(2 ** len(left), 2 ** len(right)), left, right


def bipartition_spectrum(state: StateVector, left: Sequence[str]) -> np.ndarray:
    """Singular values (descending) of the ``left`` vs rest amplitude matrix.

    Works for any bipartition; it is the Schmidt spectrum of the cut.
    """
    matrix, _, right = _split_matrix(state, left)
    if not right:
        return np.array([1.0])
    return np.linalg.svd(matrix, compute_uv=False)


def factor_out(
    state: StateVector, labels: Sequence[str], tol: float = ORACLE_TOL
) -> tuple[StateVector, StateVector]:
    """Split a product state into ``(rest, removed)``.

    Raises :class:`NotProductError` when ``labels`` are entangled with the
    remaining qubits. The rest keeps its original relative label order. The
    global phase is assigned to ``removed``.
    """
    matrix, left, right = _split_matrix(state, labels)
    if not right:
        raise LabelError("cannot factor out every qubit")
    u, s, vh = np.linalg.svd(matrix, full_matrices=False)
    if s.shape[0] > 1 and s[1] > tol:
        raise NotProductError(
            f"{left} entangled with {right}: second Schmidt coefficient {s[1]:.3e}"
        )
    rest = StateVector.normalized(right, vh[0])
    removed = StateVector.normalized(left, u[:, 0] * s[0])
    return rest, removed


@dataclass(frozen=True)
class SchmidtReport:
    """Schmidt form ``sum_k lambda_k |left_k>|right_k>`` of a two-qubit state.

    ``left_basis[k]`` and ``right_basis[k]`` are the kets paired with
    ``lambda_major`` (k=0) and ``lambda_minor`` (k=1).
    """

    lambda_major: float
    lambda_minor: float
    left_basis: np.ndarray
    right_basis: np.ndarray
    left_label: str
    right_label: str

    def reconstruct(self) -> StateVector:
        amps = self.lambda_major * np.kron(self.left_basis[0], self.right_basis[0])
        amps = amps + self.lambda_minor * np.kron(self.left_basis[1], self.right_basis[1])
        return StateVector.normalized((self.left_label, self.right_label), amps)

    def as_pair(self) -> SchmidtPair:
        return SchmidtPair.from_coefficients(self.lambda_major, self.lambda_minor)


def schmidt_decompose_pair(
    state: StateVector, left: Sequence[str], right: Sequence[str]
) -> SchmidtReport:
    """Schmidt decomposition of a two-qubit state across ``left | right``.

    Only the one-qubit-per-side case is supported. The reconstruction is
    checked against the input to 1e-10 before returning.
    """
    left, right = tuple(left), tuple(right)
    if len(left) != 1 or len(right) != 1:
        raise UnsupportedPartitionError(
            f"only one qubit per side is supported, got {left} | {right}"
        )
    if set(left + right) != set(state.labels) or state.n_qubits != 2:
        raise LabelError(f"partition {left} | {right} does not cover {state.labels}")
    matrix, _, _ = _split_matrix(state, left)
    u, s, vh = np.linalg.svd(matrix)
    report = SchmidtReport(
        lambda_major=float(s[0]),
        lambda_minor=float(s[1]),
        left_basis=np.ascontiguousarray(u.T),
        right_basis=np.ascontiguousarray(vh),
        left_label=left[0],
        right_label=right[0],
    )
    rebuilt = report.reconstruct().reordered(state.labels).amplitudes
    err = float(np.max(np.abs(rebuilt - state.amplitudes)))
    if err > ORACLE_TOL:
        raise ArithmeticError(f"Schmidt reconstruction error {err:.3e} exceeds {ORACLE_TOL}")
    return report


def single_pair_entanglement(report: SchmidtReport) -> float:
    """Entanglement of single-pair purification, ``2 * lambda_minor**2``."""
    return min(1.0, max(0.0, 2.0 * report.lambda_minor**2))


def pair_entanglement(state: StateVector) -> float:
    """Single-pair entanglement of a two-qubit state."""
    a, b = state.labels
    return single_pair_entanglement(schmidt_decompose_pair(state, (a,), (b,)))


def cut_entanglement(state: StateVector, left: Sequence[str]) -> float:
    """``2 * (second Schmidt coefficient)**2`` across ``left`` vs rest.

    For cat-form states every one-party cut has rank at most two, so this is
    the multipartite analogue of :func:`single_pair_entanglement`.
    """
    spectrum = bipartition_spectrum(state, left)
    if spectrum.shape[0] < 2:
        return 0.0
    if spectrum.shape[0] > 2 and spectrum[2] > ORACLE_TOL:
        raise UnsupportedPartitionError(f"cut {tuple(left)} has Schmidt rank above two")
    return min(1.0, max(0.0, 2.0 * float(spectrum[1]) ** 2))


def fidelity(state: StateVector, target: StateVector) -> float:
    """``|<target|state>|**2``, independent of the qubit order of either."""
    if set(state.labels) != set(target.labels):
        raise LabelError(f"label sets differ: {state.labels} vs {target.labels}")
    aligned = target.reordered(state.labels)
    overlap = np.vdot(aligned.amplitudes, state.amplitudes)
    return min(1.0, max(0.0, float(abs(overlap) ** 2)))


__all__ = [
    "BellKind",
    "MAX_QUBITS",
    "NORM_TOL",
    "ORACLE_TOL",
    "SchmidtPair",
    "SchmidtReport",
    "StateVector",
    "apply_cnot",
    "basis_state",
    "bell_state",
    "bipartition_spectrum",
    "cut_entanglement",
    "default_party_labels",
    "factor_out",
    "fidelity",
    "make_cat_state",
    "make_pair_state",
    "pair_entanglement",
    "qubit_state",
    "schmidt_decompose_pair",
    "single_pair_entanglement",
    "tensor",
    "tensor_all",
]
