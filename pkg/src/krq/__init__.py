"""Deep learning for linear Kolmogorov PDEs with MC and RQMC sampling.

The package trains feed-forward networks by empirical risk minimization
where the training uniforms come either from i.i.d. streams or from
Owen-scrambled base-2 digital nets, and ships the measurement tools
(relative-L2 evaluation, integration-error rate studies) used to compare
the two sampling regimes.
"""

from . import evaluate, lds, nn, presets, problems, quadstudy, train

__all__ = ["evaluate", "lds", "nn", "presets", "problems", "quadstudy", "train"]
__version__ = "0.1.0"
