"""traceshift: weighted-trace matrix algebras, multilinear operator integrals,
Taylor remainders of trace functionals, and spectral shift functions.

The compiled contraction kernel is used when available; otherwise the NumPy
fallback runs transparently (see :mod:`traceshift._contract`).
"""

from ._contract import BACKEND as contraction_backend
from .algebra import (
    AlgebraElement,
    Interval,
    SelfAdjointOperator,
    SNumberFunction,
    SpectralProjection,
    TraceAlgebra,
    apply_function,
    diagonalize,
    resolvent,
    s_numbers,
    schatten_norm,
    spectral_projection,
    trace,
)
from .bump import BumpFunction
from .constants import ConstantStore, estimate_symbol_constant
from .divdiff import (
    divided_difference,
    divided_difference_batch,
    opitz_divided_difference,
    opitz_matrix,
)
from .functions import (
    FourierL1Result,
    ScalarFunction,
    WitnessReport,
    bspline_fixture,
    bump_fixture,
    class_witness,
    fourier_l1,
    gaussian_fixture,
    inv_u_fixture,
    polynomial_fixture,
    product,
    sup_ratio_report,
    u_power,
    xn_xm1n_fixture,
)
from .moi import (
    MoiRequest,
    MoiResult,
    compact_trace_bound,
    moi_eval,
    moi_trace,
    norm_bound_ratio,
)
from .ssf import (
    SpectralShiftFunction,
    TestFunctionFamily,
    build_test_family,
    dd_expansion_defect,
    first_order_ssf,
    gauge_uniqueness,
    growth_report,
    jittered_grid,
    l1_bound_report,
    reconstruct_ssf,
    resolvent_expansion_defect,
    resolvent_transfer_defect,
)
from .storage import load_element, save_element
from .taylor import (
    BoundConstants,
    RemainderEvaluator,
    RemainderRecord,
    fd_derivative_oracle,
    gateaux_derivative,
    remainder_bound_constant,
    remainder_bound_report,
    taylor_remainder,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
