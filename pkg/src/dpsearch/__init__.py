"""dpsearch: adversarially robust search structures.

A library of adaptive approximate-near-neighbor indices (differentially
private selection over oblivious LSH copies) and adaptive sketched
least-squares engines (coordinate-wise private median, bounded computation
paths, and preconditioned label-shift handling), together with the
adversary simulations that separate oblivious from robust behavior.
"""

from .adaptive_ann import AdaptiveAnnIndex, AnnAnswer, QueryBudgetError, build, verify_sparsity
from .adversary import (
    AttackResult,
    IsolatedInstance,
    Transcript,
    attack_budget,
    kms_attack,
    make_isolated_instance,
    regression_adversary,
)
from .lsh import EuclideanDataset, HammingDataset, LshIndex, build_hamming, build_l2
from .mechanisms import (
    DpParams,
    MechanismDiagnostics,
    OutputGrid,
    SparseCounts,
    advanced_composition,
    amplified_epsilon,
    ann_parameters,
    dense_noisy_argmax,
    private_median,
    sample_exponential,
    sample_max_order_stat,
    sparse_noisy_argmax,
)
from .regression import (
    AdaptiveRegDP,
    AdaptiveRegPath,
    AdaptiveRegPreconditioner,
    RegProblem,
    RegUpdate,
    solve_least_squares,
)
from .sketch import ComposedSketch, CountSketchSpec, GaussianSketchSpec, SrhtSpec, fwht, sketch_dims

__version__ = "0.1.0"
