"""Hamilton-Poisson systems: structure tensor, Hamiltonian and Casimirs.

A :class:`PoissonSystem` holds an n by n matrix of expressions (the Poisson
tensor), a Hamiltonian scalar field, and a list of Casimir fields.  The
defining identities (antisymmetry of the tensor, annihilation of Casimir
gradients) are checked pointwise by :func:`verify_structure` rather than
symbolically; they only need to hold along trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expressions import Expr, ScalarField, compile_vector, variables_used

__all__ = ["PoissonSystem", "StructureReport", "verify_structure"]

STRUCTURE_TOL = 1e-10


class PoissonSystem:
    """State dimension, Poisson tensor expressions, Hamiltonian, Casimirs.

    ``metadata`` carries preset parameters (for example the inertia triple of
    the rigid-body presets) so downstream constructors and reports can
    recover them; it does not affect the dynamics.
    """

    def __init__(
        self,
        n: int,
        pi: Sequence[Sequence[Expr]],
        hamiltonian: ScalarField,
        casimirs: Sequence[ScalarField] = (),
        variables: Sequence[str] | None = None,
        metadata: dict | None = None,
    ):
        if len(pi) != n or any(len(row) != n for row in pi):
            raise ValueError(f"Poisson tensor must be {n}x{n}")
        for i, row in enumerate(pi):
            for j, entry in enumerate(row):
                used = variables_used(entry)
                if used and max(used) >= n:
                    raise ValueError(
                        f"Poisson tensor entry ({i},{j}) uses variable index "
                        f"{max(used)} outside dimension {n}"
                    )
        if hamiltonian.n != n:
            raise ValueError(
                f"Hamiltonian dimension {hamiltonian.n} does not match system "
                f"dimension {n}"
            )
        for c in casimirs:
            if c.n != n:
                raise ValueError(
                    f"Casimir dimension {c.n} does not match system dimension {n}"
                )
        self.n = int(n)
        self.pi = tuple(tuple(row) for row in pi)
        self.hamiltonian = hamiltonian
        self.casimirs = tuple(casimirs)
        self.variables = tuple(variables) if variables is not None else None
        self.metadata = dict(metadata) if metadata else {}
        flat = [entry for row in self.pi for entry in row]
        self._pi_fn = compile_vector(flat, n)
        self._free_field_fn = None

    def pi_at(self, x) -> np.ndarray:
        """Poisson tensor evaluated at ``x``."""
        return np.array(self._pi_fn(x)).reshape(self.n, self.n)

    def poisson_bracket(self, f: ScalarField, g: ScalarField, x) -> float:
        """Bracket {f, g}(x) = grad f . Pi(x) grad g."""
        if f.n != self.n or g.n != self.n:
            raise ValueError(
                f"field dimensions ({f.n}, {g.n}) do not match system "
                f"dimension {self.n}"
            )
        return float(f.gradient_at(x) @ self.pi_at(x) @ g.gradient_at(x))

    def hamiltonian_field_at(self, x) -> np.ndarray:
        """The unperturbed vector field Pi(x) grad H(x)."""
        if self._free_field_fn is None:
            self._free_field_fn = _compile_hamiltonian_field(self)
        return self._free_field_fn(x)


def _compile_hamiltonian_field(system: PoissonSystem):
    from .expressions import pycode, _hoisted_names, _build_function

    n = system.n
    names = _hoisted_names(n)
    lines = []
    for j in range(n):
        lines.append(f"    _gh{j} = {pycode(system.hamiltonian.gradient[j], names)}")
    for i in range(n):
        terms = " + ".join(
            f"({pycode(system.pi[i][j], names)}) * _gh{j}" for j in range(n)
        )
        lines.append(f"    _f{i} = {terms}")
    tup = ", ".join(f"_f{i}" for i in range(n))
    lines.append(f"    return _np_array(({tup},))")
    return _build_function(lines, n, {"_np_array": np.array})


@dataclass(frozen=True)
class StructureReport:
    """Worst-case structural residuals over a sample set.

    ``antisymmetry_residual`` is max |Pi_ij + Pi_ji| scaled by
    (1 + max |Pi_ij|); ``casimir_residual`` is max ||Pi grad C|| scaled by
    (1 + ||grad C||), over all samples and registered Casimirs.
    """

    n_samples: int
    antisymmetry_residual: float
    casimir_residual: float
    tolerance: float
    passed: bool


def verify_structure(
    system: PoissonSystem,
    samples: np.ndarray,
    tolerance: float = STRUCTURE_TOL,
    extra_casimirs: Sequence[ScalarField] = (),
) -> StructureReport:
    """Check antisymmetry and Casimir annihilation at every sample point.

    ``extra_casimirs`` are checked alongside the registered ones (used for
    the derived Casimir actually driving a dissipated run).
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("samples must be nonempty")
    if samples.shape[1] != system.n:
        raise ValueError(
            f"sample dimension {samples.shape[1]} does not match system "
            f"dimension {system.n}"
        )
    casimirs = tuple(system.casimirs) + tuple(extra_casimirs)
    worst_anti = 0.0
    worst_casimir = 0.0
    for x in samples:
        pi = system.pi_at(x)
        scale = 1.0 + float(np.abs(pi).max())
        worst_anti = max(worst_anti, float(np.abs(pi + pi.T).max()) / scale)
        for c in casimirs:
            gc = c.gradient_at(x)
            residual = float(np.linalg.norm(pi @ gc)) / (
                1.0 + float(np.linalg.norm(gc))
            )
            worst_casimir = max(worst_casimir, residual)
    return StructureReport(
        n_samples=len(samples),
        antisymmetry_residual=worst_anti,
        casimir_residual=worst_casimir,
        tolerance=tolerance,
        passed=worst_anti <= tolerance and worst_casimir <= tolerance,
    )
