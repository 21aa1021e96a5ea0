"""walshlab: variable-exponent norms, dyadic martingales and Walsh-Fourier
analysis on finite grids.

Everything lives on [0,1) split into 2^N equal cells.  The subpackages:

- ``spaces``      variable exponents, the modular, L_{p(.)} / L_{p(.),q} norms
- ``martingales`` filtrations, conditional expectations, M / S / s operators
- ``atoms``       stopping-time atomic decompositions and atomic norms
- ``walsh``       Walsh system, FWHT, Dirichlet/Fejer kernels, Fejer means
- ``maximal``     the geometric maximal operators U_s, V_{alpha,s} and the
                  growth counterexamples
- ``lab``         seeded test families, operator-norm estimation, experiment
                  drivers and report files
"""

__version__ = "0.1.0"

from .spaces import (  # noqa: F401
    GridFunction,
    VariableExponent,
    ConditionReport,
    exponent_bounds,
    check_condition_log,
    conjugate_exponent,
    modular,
    lp_norm,
    lorentz_norm,
)
from .martingales import (  # noqa: F401
    INF,
    Filtration,
    Martingale,
    StoppingTime,
    cond_expectation,
    doob_maximal,
    square_function,
    cond_square_function,
    stopped_martingale,
    regularity_constant,
    martingale_transform,
)
from .atoms import AtomBundle, AtomEntry, decompose, verify_atom, atomic_norm  # noqa: F401
from .walsh import (  # noqa: F401
    WalshSpectrum,
    walsh_function,
    fwht,
    ifwht,
    dirichlet_kernel,
    fejer_kernel,
    partial_sum,
    fejer_mean,
    fejer_maximal,
    partial_sum_via_transform,
)
from .maximal import (  # noqa: F401
    u_op,
    v_op,
    u_counterexample,
    v_counterexample,
    sigma_counterexample,
)
from .lab import (  # noqa: F401
    ExperimentConfig,
    Report,
    generate_family,
    fitted_slope,
    empirical_opnorm,
    run_experiment,
    save_report,
)
