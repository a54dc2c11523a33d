"""Differentially private substring and document counting."""

__version__ = "0.1.0"

from .corpus import (Alphabet, Database, InvalidInputError, SuffixIndex, build_index,  # noqa: E402
                     count, count_capped, count_db, encode_texts, read_corpus)
from .mechanisms import (BudgetExceededError, InvalidParameterError, NoiseSource,  # noqa: E402
                         PrivacyBudget)
from .countingtrie import PrivateCountTrie, build_private_trie  # noqa: E402
from .qgrams import QGramStructure, build_qgrams_approx, build_qgrams_pure  # noqa: E402
from .treecount import RootedTree, dp_tree_counts_approx, dp_tree_counts_pure  # noqa: E402
from .evaluation import run_eval  # noqa: E402
from .estimators import (PrivateQGramCounter, PrivateSubstringCounter,  # noqa: E402
                         PrivateTreeCounter)

__all__ = [
    "Alphabet", "Database", "InvalidInputError", "SuffixIndex", "build_index", "count",
    "count_capped", "count_db", "encode_texts", "read_corpus", "BudgetExceededError",
    "InvalidParameterError", "NoiseSource", "PrivacyBudget", "PrivateCountTrie",
    "build_private_trie", "QGramStructure", "build_qgrams_approx", "build_qgrams_pure",
    "RootedTree", "dp_tree_counts_approx", "dp_tree_counts_pure", "run_eval",
    "PrivateQGramCounter", "PrivateSubstringCounter", "PrivateTreeCounter",
]
