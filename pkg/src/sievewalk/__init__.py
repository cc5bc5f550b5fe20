"""Sieved sets of integers and lattice points under alpha-random walks."""

__version__ = "0.1.0"

from .binomial import (
    ApSumResult,
    CongruenceSystem,
    PmfParams,
    ap_pmf_sum,
    crt_pmf_sum,
    deviation_sweep,
    pmf,
    pmf_mode,
)
from .densities import (
    DensityValue,
    constant_c,
    constant_c3_kfree,
    constant_c3_series,
    count_V,
    count_V2,
    count_V3,
    mertens_cx,
)
from .sieve import (
    GeneratorFamily,
    InadmissibleSystemError,
    SieveSystem,
    load_system,
    membership,
    sieve_interval,
)
from .walk import WalkConfig, batch_trials, walk_1d, walk_1d_smallprimes, walk_2d
