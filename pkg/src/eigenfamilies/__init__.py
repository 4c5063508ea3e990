"""Chart-based verification of eigenfamilies on Riemannian manifolds."""

__version__ = "0.1.0"

from .geometry import (  # noqa: E402
    Chart,
    ChartedManifold,
    ComplexField,
    DomainError,
    Frame,
    SingularMetricError,
    fd_oracle,
    grad,
    kappa,
    product_rule_residual,
    tau,
    tau_divergence,
)
from .jet import Jet2  # noqa: E402
from .manifolds import (  # noqa: E402
    Lattice,
    MappingTorusSpec,
    TrigPoly,
    dual_lattice,
    flat_torus,
    mapping_torus,
    round_sphere,
    torus_family,
    weighted_sasakian,
)
from .submersions import (  # noqa: E402
    circle_submersion_check,
    projection_harmonicity_check,
    torus_submersion_check,
    volume_density_check,
)
from .transforms import (  # noqa: E402
    PolyPair,
    Polynomial,
    compose_monomial,
    harmonic_morphism_check,
    predict_composed_eigenvalues,
    quotient_field,
)
from .verify import (  # noqa: E402
    EigenFamilySpec,
    Sampling,
    VerificationReport,
    check_A_structure,
    modulus_diagnostics,
    multiplicative_relation,
    polar_checks,
    verify_family,
)
