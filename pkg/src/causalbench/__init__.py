"""Causality-analysis toolbox: bivariate, conditioned and dimension-reduction
Granger-causality measures with a Monte Carlo benchmark harness."""

from .evaluation import (
    CausalNetwork,
    ConfusionCounts,
    Scores,
    aggregate,
    confusion,
    decide_network,
    scores,
)
from .knninfo import NeighborIndex, ksg_cmi, ksg_mi
from .linear import cgci, fisher_test, fit_ols, gci, pcgc, pcgc_select, rcgci
from .nue import MixedEmbedding, mime, mixed_embedding, pmime, pmime_network, pte, te
from .series import (
    LaggedTerm,
    LagMatrix,
    MultivariateTimeSeries,
    build_lag_matrix,
    load_csv,
    save_csv,
    standardize,
    uniform_embedding,
)
from .significance import f_cdf, surrogate_pvalue, surrogate_test, time_shift_surrogate
from .systems import (
    GroundTruth,
    NoiseSpec,
    SystemSpec,
    add_noise,
    gen_henon,
    gen_s1,
    gen_s2,
    gen_s4,
    gen_s5,
    gen_s6,
    generate,
    transient_discard,
)

__version__ = "0.1.0"
