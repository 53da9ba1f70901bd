"""Multi-objective blind source separation toolkit.

Separates linear signal mixtures by minimizing several separation criteria
at once with an SPEA2 evolutionary engine, returning a non-dominated set of
separation matrices to browse, order, select from and combine.
"""

__version__ = "0.1.0"
