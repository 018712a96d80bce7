import numpy as np
import pytest

from hpflow.expressions import ScalarField, parse
from hpflow.systems import PoissonSystem, verify_structure
from hpflow.rigid_body import VARIABLES, make_system

from support import FIGURE_INERTIA

I1, I2, I3 = FIGURE_INERTIA


@pytest.fixture(scope="module")
def sys3():
    return make_system(FIGURE_INERTIA)


def euler_field(x):
    return np.array(
        [
            (1 / I3 - 1 / I2) * x[1] * x[2],
            (1 / I1 - 1 / I3) * x[0] * x[2],
            (1 / I2 - 1 / I1) * x[0] * x[1],
        ]
    )


class TestBracket:
    def test_casimir_annihilates_energy(self, sys3):
        c0 = sys3.casimirs[0]
        h = sys3.hamiltonian
        value = sys3.poisson_bracket(c0, h, (0.3, -0.2, 0.5))
        assert abs(value) <= 1e-12

    def test_casimir_annihilates_arbitrary_fields(self, sys3):
        c0 = sys3.casimirs[0]
        f = ScalarField(parse("x1*x2 + x3^3", VARIABLES), 3)
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.uniform(-1, 1, 3)
            assert abs(sys3.poisson_bracket(c0, f, x)) <= 1e-12

    def test_self_bracket_vanishes(self, sys3):
        h = sys3.hamiltonian
        assert abs(sys3.poisson_bracket(h, h, (0.7, -0.3, 0.2))) <= 1e-15

    def test_antisymmetry(self, sys3):
        f = ScalarField(parse("x1^2 - x3", VARIABLES), 3)
        g = ScalarField(parse("x2*x3", VARIABLES), 3)
        x = (0.4, 0.1, -0.9)
        assert sys3.poisson_bracket(f, g, x) == pytest.approx(
            -sys3.poisson_bracket(g, f, x), rel=1e-13
        )

    def test_coordinate_bracket_reads_tensor_entry(self, sys3):
        m0 = 0.7
        f = ScalarField(parse("x1", VARIABLES), 3)
        g = ScalarField(parse("x2", VARIABLES), 3)
        assert sys3.poisson_bracket(f, g, (0.0, 0.0, m0)) == pytest.approx(
            -m0, abs=1e-15
        )

    def test_dimension_mismatch(self, sys3):
        f = ScalarField(parse("y1^2", ["y1"]), 1)
        with pytest.raises(ValueError, match="dimension"):
            sys3.poisson_bracket(f, sys3.hamiltonian, (0.1, 0.2, 0.3))


class TestHamiltonianField:
    def test_matches_closed_form(self, sys3):
        rng = np.random.default_rng(1)
        for _ in range(50):
            x = rng.uniform(-1, 1, 3)
            np.testing.assert_allclose(
                sys3.hamiltonian_field_at(x), euler_field(x), rtol=0, atol=1e-15
            )


class TestVerifyStructure:
    def test_rigid_body_passes(self, sys3):
        rng = np.random.default_rng(42)
        samples = rng.uniform(-1, 1, size=(1000, 3))
        report = verify_structure(sys3, samples)
        assert report.passed
        assert report.antisymmetry_residual <= 1e-12
        assert report.casimir_residual <= 1e-12
        assert report.n_samples == 1000

    def test_perturbed_entry_fails(self, sys3):
        pi = [list(row) for row in sys3.pi]
        pi[0][1] = parse("-x3 + 0.001", VARIABLES)
        broken = PoissonSystem(
            3, pi, sys3.hamiltonian, sys3.casimirs, variables=VARIABLES
        )
        rng = np.random.default_rng(3)
        report = verify_structure(broken, rng.uniform(-1, 1, size=(200, 3)))
        assert not report.passed
        assert 2e-4 <= report.antisymmetry_residual <= 2e-3

    def test_non_casimir_candidate_fails(self, sys3):
        candidate = ScalarField(parse("x1", VARIABLES), 3)
        system = PoissonSystem(
            3,
            sys3.pi,
            sys3.hamiltonian,
            casimirs=(candidate,),
            variables=VARIABLES,
        )
        rng = np.random.default_rng(4)
        report = verify_structure(system, rng.uniform(-1, 1, size=(200, 3)))
        # Pi grad(x1) = (0, x3, -x2), generically far from zero
        assert not report.passed
        assert report.casimir_residual > 1e-2

    def test_empty_samples_rejected(self, sys3):
        with pytest.raises(ValueError, match="nonempty"):
            verify_structure(sys3, np.empty((0, 3)))

    def test_wrong_sample_dimension(self, sys3):
        with pytest.raises(ValueError, match="dimension"):
            verify_structure(sys3, np.zeros((5, 2)))


class TestConstruction:
    def test_tensor_shape_enforced(self, sys3):
        with pytest.raises(ValueError, match="3x3"):
            PoissonSystem(3, sys3.pi[:2], sys3.hamiltonian)

    def test_hamiltonian_dimension_enforced(self, sys3):
        h = ScalarField(parse("y1^2", ["y1"]), 1)
        with pytest.raises(ValueError, match="dimension"):
            PoissonSystem(3, sys3.pi, h)

    def test_casimir_dimension_enforced(self, sys3):
        c = ScalarField(parse("y1", ["y1"]), 1)
        with pytest.raises(ValueError, match="dimension"):
            PoissonSystem(3, sys3.pi, sys3.hamiltonian, casimirs=(c,))

    def test_metadata_is_copied(self):
        source = {"inertia": FIGURE_INERTIA}
        system = make_system(FIGURE_INERTIA)
        assert system.metadata["inertia"] == source["inertia"]
        system.metadata["extra"] = 1  # local mutation only
        assert "extra" not in make_system(FIGURE_INERTIA).metadata
