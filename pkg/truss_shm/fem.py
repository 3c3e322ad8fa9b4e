import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from truss_shm.constants import Solver
from truss_shm.model import TrussModel, bar_length
from truss_shm.utils.exceptions import (
    CholeskyError,
    ConvergenceError,
    DimensionMismatchError,
    MechanismError,
    ModelValidationError,
)

__all__ = (
    "DofMap",
    "ElementMatrices",
    "ModalSignature",
    "element_stiffness",
    "element_mass",
    "element_matrices",
    "assemble",
    "solve_modes",
    "modal_signature",
    "jacobi_eigh",
    "check_signature",
)

log = logging.getLogger(__name__)

DIRECTIONS = ("x", "y")

# Consistent mass of a two-node bar with translational inertia in both directions, per unit rho*A*L
_MASS_TEMPLATE = np.array(
    [
        [2.0, 0.0, 1.0, 0.0],
        [0.0, 2.0, 0.0, 1.0],
        [1.0, 0.0, 2.0, 0.0],
        [0.0, 1.0, 0.0, 2.0],
    ]
) / 6.0


class DofMap:
    """
    Numbering of the free degrees of freedom.

    Global DOF 2*(node - 1) + d (d = 0 for x, 1 for y) is either constrained by a support
    or mapped to a free index; free indices are contiguous from 0 in global order.
    """

    def __init__(self, model: TrussModel):
        fixed = set()
        for support in model.supports:
            if support.fix_x:
                fixed.add(2 * (support.node - 1))
            if support.fix_y:
                fixed.add(2 * (support.node - 1) + 1)

        self.n_global = 2 * len(model.nodes)
        self.free = tuple(dof for dof in range(self.n_global) if dof not in fixed)
        self.constrained = tuple(sorted(fixed))
        self._index = {dof: index for index, dof in enumerate(self.free)}

    @property
    def n_free(self) -> int:
        """Number of unconstrained DOFs."""
        return len(self.free)

    def index(self, node: int, direction: str) -> Optional[int]:
        """Free index of (`node`, `direction`), or None when that DOF is constrained."""
        return self._index.get(2 * (node - 1) + DIRECTIONS.index(direction))

    def element_dofs(self, node_i: int, node_j: int) -> list[Optional[int]]:
        """Free indices (None where constrained) of a bar's four DOFs, in (xi, yi, xj, yj) order."""
        return [self.index(node, direction) for node in (node_i, node_j) for direction in DIRECTIONS]

    def labels(self) -> Iterator[str]:
        """Human-readable names of the free DOFs, e.g. `n3x`."""
        for dof in self.free:
            yield f"n{dof // 2 + 1}{DIRECTIONS[dof % 2]}"


@dataclass(frozen=True)
class ElementMatrices:
    """Stiffness and consistent mass of one bar in global coordinates."""

    k_e: np.ndarray
    m_e: np.ndarray


class ModalSignature:
    """
    The first natural frequencies (rad/s, ascending) of a structure and their mass-normalized mode shapes.

    `modes` has one column per frequency and one row per free DOF. Both arrays are read-only.
    """

    __slots__ = ("frequencies", "modes")

    def __init__(self, frequencies: np.ndarray, modes: np.ndarray):
        frequencies = np.array(frequencies, dtype=float)
        modes = np.array(modes, dtype=float)
        if frequencies.ndim != 1 or modes.ndim != 2 or modes.shape[1] != frequencies.shape[0]:
            raise DimensionMismatchError(
                f"{frequencies.shape[0] if frequencies.ndim == 1 else frequencies.shape} frequencies "
                f"do not match mode matrix of shape {modes.shape}."
            )
        frequencies.setflags(write=False)
        modes.setflags(write=False)
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "modes", modes)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("ModalSignature is immutable.")

    def __reduce__(self) -> tuple:
        return (ModalSignature, (np.array(self.frequencies), np.array(self.modes)))

    @property
    def n_modes(self) -> int:
        """Number of modes."""
        return self.frequencies.shape[0]

    @property
    def n_dofs(self) -> int:
        """Length of each mode shape."""
        return self.modes.shape[0]

    @property
    def frequencies_hz(self) -> np.ndarray:
        """Natural frequencies in Hz."""
        return self.frequencies / (2.0 * math.pi)

    def truncated(self, n_modes: int) -> "ModalSignature":
        """The signature restricted to its first `n_modes` pairs."""
        return ModalSignature(self.frequencies[:n_modes], self.modes[:, :n_modes])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModalSignature):
            return NotImplemented
        return np.array_equal(self.frequencies, other.frequencies) and np.array_equal(self.modes, other.modes)

    def __hash__(self) -> int:
        return hash((self.frequencies.tobytes(), self.modes.tobytes()))

    def __repr__(self) -> str:
        return f"ModalSignature(n_modes={self.n_modes}, n_dofs={self.n_dofs})"


def _direction_cosines(model: TrussModel, bar_id: int) -> tuple[float, float, float]:
    bar = model.bar(bar_id)
    length = bar_length(model, bar_id)
    if length <= 0:
        raise ModelValidationError(f"Bar {bar_id} has zero length.")
    start, end = model.node(bar.node_i), model.node(bar.node_j)
    return (end.x - start.x) / length, (end.y - start.y) / length, length


def element_stiffness(model: TrussModel, bar_id: int, effective_e: Optional[float] = None) -> np.ndarray:
    """
    Global-frame stiffness of an axial bar: (E A / L) [[T, -T], [-T, T]] with T = [[c², cs], [cs, s²]].

    `effective_e` defaults to the bar's damaged modulus.
    """
    c, s, length = _direction_cosines(model, bar_id)
    if effective_e is None:
        effective_e = model.effective_modulus(bar_id)
    t = np.array([[c * c, c * s], [c * s, s * s]])
    return effective_e * model.material.cross_area / length * np.block([[t, -t], [-t, t]])


def element_mass(model: TrussModel, bar_id: int) -> np.ndarray:
    """Consistent mass of a bar with transverse inertia; invariant under rotation, total rho A L per direction."""
    _, _, length = _direction_cosines(model, bar_id)
    material = model.material
    return material.density * material.cross_area * length * _MASS_TEMPLATE


def element_matrices(model: TrussModel, bar_id: int) -> ElementMatrices:
    """Stiffness and mass of `bar_id` together."""
    return ElementMatrices(k_e=element_stiffness(model, bar_id), m_e=element_mass(model, bar_id))


def assemble(model: TrussModel) -> tuple[np.ndarray, np.ndarray, DofMap]:
    """
    Global stiffness K and mass M restricted to the free DOFs.

    Constrained rows and columns are eliminated. Raises `MechanismError` when K is
    not positive definite, i.e. the restrained truss can still move without straining a bar.
    """
    dof_map = DofMap(model)
    n = dof_map.n_free
    stiffness = np.zeros((n, n))
    mass = np.zeros((n, n))

    for bar in model.bars:
        element = element_matrices(model, bar.id)
        dofs = dof_map.element_dofs(bar.node_i, bar.node_j)
        for a, row in enumerate(dofs):
            if row is None:
                continue
            for b, col in enumerate(dofs):
                if col is None:
                    continue
                stiffness[row, col] += element.k_e[a, b]
                mass[row, col] += element.m_e[a, b]

    _check_mechanism(stiffness)
    return stiffness, mass, dof_map


def _check_mechanism(stiffness: np.ndarray) -> None:
    try:
        factor = np.linalg.cholesky(stiffness)
    except np.linalg.LinAlgError:
        raise MechanismError("The stiffness matrix is singular: the truss is a mechanism.") from None
    smallest_pivot = float(np.min(np.diag(factor))) ** 2
    if smallest_pivot <= Solver.mechanism_tolerance * float(np.max(np.diag(stiffness))):
        raise MechanismError(
            f"The stiffness matrix is numerically singular (smallest pivot {smallest_pivot:.3e}): "
            "the truss is a mechanism."
        )


def _off_norm(matrix: np.ndarray) -> float:
    # Summed from the strict upper triangle: subtracting the diagonal from the full norm cancels catastrophically
    return math.sqrt(2.0) * float(np.linalg.norm(np.triu(matrix, k=1)))


def _sweep(a: np.ndarray, v: np.ndarray) -> None:
    """One cyclic-by-row Jacobi sweep, annihilating every off-diagonal pair in place."""
    n = a.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = a[p, q]
            if apq == 0.0:
                continue
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c

            col_p = a[:, p].copy()
            col_q = a[:, q].copy()
            a[:, p] = c * col_p - s * col_q
            a[:, q] = s * col_p + c * col_q
            row_p = a[p, :].copy()
            row_q = a[q, :].copy()
            a[p, :] = c * row_p - s * row_q
            a[q, :] = s * row_p + c * row_q
            a[p, q] = a[q, p] = 0.0

            vec_p = v[:, p].copy()
            vec_q = v[:, q].copy()
            v[:, p] = c * vec_p - s * vec_q
            v[:, q] = s * vec_p + c * vec_q


def jacobi_eigh(
    matrix: np.ndarray,
    max_sweeps: int = Solver.max_sweeps,
    tolerance: float = Solver.tolerance,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm is at most `tolerance` times the full norm;
    one further sweep then polishes the result, which costs little because convergence is quadratic.
    Returns unsorted eigenvalues and the orthonormal eigenvector columns.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    total = math.sqrt(float(np.sum(a * a)))
    if n == 1 or total == 0.0:
        return np.diag(a).copy(), v

    for sweep in range(1, max_sweeps + 1):
        off = _off_norm(a)
        if off <= tolerance * total:
            _sweep(a, v)
            log.trace(f"Jacobi converged after {sweep} sweeps (off-diagonal norm {off:.3e})")
            return np.diag(a).copy(), v
        _sweep(a, v)

    off = _off_norm(a)
    if off <= tolerance * total:
        return np.diag(a).copy(), v
    raise ConvergenceError(max_sweeps, off)


def _fix_sign(modes: np.ndarray) -> np.ndarray:
    """Flip every column so that its largest-magnitude component is positive (first such index on ties)."""
    rows = np.argmax(np.abs(modes), axis=0)
    signs = np.where(modes[rows, np.arange(modes.shape[1])] < 0, -1.0, 1.0)
    return modes * signs


def solve_modes(stiffness: np.ndarray, mass: np.ndarray, n_modes: int) -> ModalSignature:
    """
    Lowest `n_modes` eigenpairs of K phi = omega² M phi.

    M = L Lᵀ reduces the problem to the standard symmetric matrix L⁻¹ K L⁻ᵀ, which is
    diagonalised by `jacobi_eigh`; back-substitution gives M-orthonormal mode shapes.
    """
    stiffness = np.asarray(stiffness, dtype=float)
    mass = np.asarray(mass, dtype=float)
    if stiffness.ndim != 2 or stiffness.shape[0] != stiffness.shape[1] or stiffness.shape != mass.shape:
        raise DimensionMismatchError(f"K {stiffness.shape} and M {mass.shape} must be equal square matrices.")
    dimension = stiffness.shape[0]
    if not 1 <= n_modes <= dimension:
        raise ModelValidationError(f"Cannot extract {n_modes} modes from a system with {dimension} free DOFs.")

    try:
        lower = np.linalg.cholesky(mass)
    except np.linalg.LinAlgError:
        raise CholeskyError("The mass matrix is not positive definite.") from None

    half = solve_triangular(lower, stiffness, lower=True)
    reduced = solve_triangular(lower, half.T, lower=True)
    reduced = 0.5 * (reduced + reduced.T)

    eigenvalues, vectors = jacobi_eigh(reduced)
    order = np.argsort(eigenvalues, kind="stable")[:n_modes]
    eigenvalues = eigenvalues[order]
    modes = solve_triangular(lower.T, vectors[:, order], lower=False)

    frequencies = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return ModalSignature(frequencies, _fix_sign(modes))


def modal_signature(model: TrussModel, n_modes: int) -> ModalSignature:
    """Assemble `model` (damage included) and solve for its first `n_modes` modes."""
    stiffness, mass, _ = assemble(model)
    return solve_modes(stiffness, mass, n_modes)


def check_signature(
    stiffness: np.ndarray,
    mass: np.ndarray,
    signature: ModalSignature,
    residual_tolerance: float = Solver.residual_tolerance,
    normalization_tolerance: float = Solver.normalization_tolerance,
) -> list[str]:
    """
    Check the eigen residual and mass normalization of every pair in `signature`.

    Returns a description of each violated invariant; an empty list means the signature is sound.
    """
    problems = []
    if signature.n_dofs != stiffness.shape[0]:
        return [f"signature has {signature.n_dofs} DOFs, the model {stiffness.shape[0]}"]

    for j, omega in enumerate(signature.frequencies):
        phi = signature.modes[:, j]
        k_phi = stiffness @ phi
        residual = float(np.linalg.norm(k_phi - omega * omega * (mass @ phi)))
        if residual > residual_tolerance * float(np.linalg.norm(k_phi)):
            problems.append(f"mode {j + 1}: residual {residual:.3e} exceeds tolerance")
        norm = float(phi @ mass @ phi)
        if abs(norm - 1.0) > normalization_tolerance:
            problems.append(f"mode {j + 1}: phiᵀ M phi = {norm!r}")
    if np.any(np.diff(signature.frequencies) < 0):
        problems.append("frequencies are not ascending")
    return problems
