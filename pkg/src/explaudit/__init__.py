"""explaudit: subgroup disparity auditing for post-hoc explanations.

Train a small text classifier, explain its predictions with six feature
attribution methods, score the explanations with seven quality metrics,
and statistically test whether explanation quality differs between
paired subgroups.
"""

from .errors import ConfigError, DataError, ExplauditError

__all__ = ["ConfigError", "DataError", "ExplauditError"]
__version__ = "0.1.0"
