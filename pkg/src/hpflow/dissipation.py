"""Energy-preserving, Casimir-dissipating perturbation of a Poisson flow.

The perturbed vector field is ``Pi(x) grad H(x) + G(x) grad C(x)`` with

    G = grad H (x) grad H^T - ||grad H||^2 * Identity.

G annihilates grad H exactly, so the Hamiltonian stays conserved, while the
quadratic form grad C . G grad C equals the Cauchy-Schwarz defect
(grad C . grad H)^2 - ||grad C||^2 ||grad H||^2 and is never positive: the
chosen Casimir can only decrease along solutions.  Equality holds exactly
where the two gradients are linearly dependent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expressions import ScalarField, _build_function, _hoisted_names, pycode
from .systems import PoissonSystem

__all__ = [
    "dissipation_matrix",
    "DissipatedField",
    "IdentityResiduals",
    "DEPENDENCE_TOL",
]

# Scale-invariant Cauchy-Schwarz defect threshold below which the gradients
# are declared linearly dependent.
DEPENDENCE_TOL = 1e-10


def dissipation_matrix(grad_h: np.ndarray) -> np.ndarray:
    """The symmetric, negative-semidefinite matrix built from grad H.

    Eigenvalues are 0 (along grad_h, when nonzero) and -||grad_h||^2 with
    multiplicity n-1; for grad_h = 0 the matrix vanishes entirely.
    """
    g = np.asarray(grad_h, dtype=float)
    if g.ndim != 1:
        raise ValueError("grad_h must be a vector")
    return np.outer(g, g) - (g @ g) * np.eye(len(g))


def gradients_dependent(grad_c: np.ndarray, grad_h: np.ndarray) -> bool:
    """True when the Cauchy-Schwarz defect is zero to within DEPENDENCE_TOL."""
    cc = float(grad_c @ grad_c)
    hh = float(grad_h @ grad_h)
    ch = float(grad_c @ grad_h)
    defect = cc * hh - ch * ch
    return defect <= DEPENDENCE_TOL * (1.0 + cc * hh)


@dataclass(frozen=True)
class IdentityResiduals:
    """Pointwise check of the algebraic identities satisfied by G.

    grad_h_residual: ||G grad H||, identically zero up to roundoff.
    casimir_quad_form: grad C . G grad C, the Casimir decay rate; never
        positive beyond roundoff.
    dependent: whether grad C and grad H are linearly dependent at the point
        (exactly the condition for the quad form to vanish).
    """

    grad_h_residual: float
    casimir_quad_form: float
    dependent: bool


class DissipatedField:
    """The perturbed vector field for one system and one chosen Casimir.

    Immutable; evaluation is reentrant.  The right-hand side is compiled to
    a single flat Python function so adaptive integration stays cheap.
    """

    def __init__(self, system: PoissonSystem, casimir: ScalarField):
        if casimir.n != system.n:
            raise ValueError(
                f"Casimir dimension {casimir.n} does not match system "
                f"dimension {system.n}"
            )
        self.system = system
        self.casimir = casimir
        self.n = system.n
        self._field_fn = _compile_dissipated_field(system, casimir)

    def __call__(self, x) -> np.ndarray:
        return self._field_fn(x)

    def field_at(self, x) -> np.ndarray:
        """Pi(x) grad H(x) + G(x) grad C(x)."""
        return self._field_fn(x)

    def conservative_at(self, x) -> np.ndarray:
        """The unperturbed part Pi(x) grad H(x)."""
        return self.system.hamiltonian_field_at(x)

    def dissipation_at(self, x) -> np.ndarray:
        """The perturbation G(x) grad C(x) alone (the applied torque for the
        rigid-body presets)."""
        gh = self.grad_h_at(x)
        gc = self.grad_c_at(x)
        return (gh @ gc) * gh - (gh @ gh) * gc

    def grad_h_at(self, x) -> np.ndarray:
        return self.system.hamiltonian.gradient_at(x)

    def grad_c_at(self, x) -> np.ndarray:
        return self.casimir.gradient_at(x)

    def hamiltonian_at(self, x) -> float:
        return self.system.hamiltonian.value(x)

    def casimir_at(self, x) -> float:
        return self.casimir.value(x)

    def identity_residuals(self, x) -> IdentityResiduals:
        """Evaluate ||G grad H||, the Casimir quadratic form, and dependence."""
        gh = self.grad_h_at(x)
        gc = self.grad_c_at(x)
        g = dissipation_matrix(gh)
        return IdentityResiduals(
            grad_h_residual=float(np.linalg.norm(g @ gh)),
            casimir_quad_form=float(gc @ g @ gc),
            dependent=gradients_dependent(gc, gh),
        )

    def casimir_rate(self, x) -> float:
        """d/dt of the chosen Casimir along the flow: grad C . G grad C <= 0."""
        gh = self.grad_h_at(x)
        gc = self.grad_c_at(x)
        ch = float(gc @ gh)
        return ch * ch - float(gc @ gc) * float(gh @ gh)


def _compile_dissipated_field(system: PoissonSystem, casimir: ScalarField):
    # field_i = sum_j Pi_ij gh_j + (gh.gc) gh_i - (gh.gh) gc_i
    n = system.n
    names = _hoisted_names(n)
    lines = []
    for j in range(n):
        lines.append(f"    _gh{j} = {pycode(system.hamiltonian.gradient[j], names)}")
    for j in range(n):
        lines.append(f"    _gc{j} = {pycode(casimir.gradient[j], names)}")
    lines.append(
        "    _s = " + " + ".join(f"_gh{j} * _gc{j}" for j in range(n))
    )
    lines.append(
        "    _q = " + " + ".join(f"_gh{j} * _gh{j}" for j in range(n))
    )
    for i in range(n):
        conservative = " + ".join(
            f"({pycode(system.pi[i][j], names)}) * _gh{j}" for j in range(n)
        )
        lines.append(f"    _f{i} = {conservative} + _s * _gh{i} - _q * _gc{i}")
    tup = ", ".join(f"_f{i}" for i in range(n))
    lines.append(f"    return _np_array(({tup},))")
    return _build_function(lines, n, {"_np_array": np.array})
