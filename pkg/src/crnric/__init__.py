"""Rate-independent chemical reaction networks: exact reachability, siphon analysis,
compilation of piecewise linear functions, and mass-action simulation."""

from .core import (
    Crc,
    Crn,
    CrnError,
    InapplicableReaction,
    NegativeResult,
    ParseError,
    Reaction,
    State,
    applicable,
    apply_flux,
    parse_crc,
    parse_crn,
    parse_state,
    serialize_crc,
    serialize_crn,
    serialize_state,
)
from .reach import (
    Path,
    ReachVerdict,
    SignInfeasible,
    compress_path,
    decide_reachable,
    decide_reachable_bruteforce,
    producible,
    rationalize_path,
    straight_line_feasible,
    verify_path,
)
from .analysis import (
    feedforward_order,
    is_siphon,
    minimal_siphons,
    output_stable,
    output_stable_siphons,
    static_equilibrium,
)
from .pwl import (
    AffineComponent,
    MaxMinForm,
    RegionalPwl,
    check_positive_continuous,
    dualrail_decode,
    dualrail_encode,
    eval_maxmin,
    parse_pwl,
    regional_to_maxmin,
)
from .compiler import (
    CompiledCrc,
    compile_affine,
    compile_direct,
    compile_linear,
    compile_max2,
    compile_maxmin,
    compile_min2,
    run_schedule,
)
from .dynamics import RatedCrn, check_convergence, derive_odes, simulate, trajectory_to_witness
from .harness import (
    AdversaryConfig,
    adversarial_prefix,
    linearity_probe,
    rationality_probe,
    verify_stable_computation,
)

__version__ = "0.1.0"
