"""Transductive vs standard online learning: games, learners, adversaries and exact oracles."""
from __future__ import annotations

from .adversaries import (
    BalancedRatioAdversary,
    BalancedRatioParams,
    LittlestoneTreeAdversary,
    ScriptedAdversary,
    construct_sequence,
)
from .engine import Round, Transcript, count_mistakes, play_standard, play_transductive
from .errors import (
    BudgetExceeded,
    DepthOverflow,
    ExpertCapExceeded,
    ProbeNondeterminism,
    RealizabilityViolation,
    SequenceLengthMismatch,
    TransOnlineError,
)
from .hypotheses import ExplicitClass, SparseClass, VersionSpace, ldim
from .learners import HalvingLearner, SOALearner, TransductiveLearner
from .oracle import OracleBudget, forced_mistakes, std_value, trans_value, trans_value_fixed_seq
from .seqmin import RigidTable, essential_indices, minimalize, rigidify
from .treebits import NodeId

__version__ = "0.1.0"
