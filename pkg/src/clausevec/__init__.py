"""Fixed-size vector embeddings of first-order CNF clauses.

Pattern encoders (term walks, chain patterns) and graph neural encoders
(GCN, BoC-GCN, R-GCN, MPNN, DAG-LSTM-pooled MPNN) over TPTP ``cnf`` input.
"""

from .fol import (
    Clause, Fn, GeneratorConfig, Literal, Problem, SkolemPolicy, Var, classify_symbol,
    clause_to_string, generate_random_clauses, parse_cnf_file, parse_cnf_problem,
)
from .gnn import GNN_ENCODERS, EncoderConfig, GraphEncoder
from .graphs import (
    FormulaGraph, boc_features, build_name_shared_tree, build_shared_subexpr_dag, topological_levels,
)
from .patterns import (
    FeatureVector, PatternConfig, chain_patterns, encode_chain_patterns, encode_term_walks,
    hash_feature, term_walks,
)

__version__ = "0.1.0"
