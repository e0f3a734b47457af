"""Graphical lasso through max-det completion on chordal thresholded patterns."""
from .chordal import (
    EliminationTree,
    chordal_completion,
    has_no_fill,
    is_chordal,
    mcs_order,
    symbolic_factor,
    treewidth,
)
from .errors import (
    AmbiguousLevel,
    ChordalGlassoError,
    DimensionMismatch,
    NotACorrelation,
    NotChordal,
    NotCompletable,
    NotConverged,
    NotNoFill,
    NotPositiveDefinite,
    TooLarge,
)
from .glasso import (
    BoundStatus,
    EquivalenceCertificate,
    GLSolution,
    beta_bound,
    check_equivalence,
    components,
    gl_objective,
    inverse_consistent_complement,
    is_sign_consistent,
    kkt_check,
    residue,
    solve,
    spectrum,
)
from .maxdet import CholeskyFactors, complete_primal, dual_objective, logdet, solve_dual, verify_foc
from .spmat import Permutation, SparsityPattern, SymSparseMatrix, permute, project, submatrix

__version__ = "0.1.0"
