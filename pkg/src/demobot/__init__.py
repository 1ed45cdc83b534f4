"""Desk-scale science-demonstration robot pipeline.

Subpackages: sim (tabletop simulator), data (episodes and corpora),
annotate (structured teaching annotations), model (multimodal policy with
text decoder), evaluation (metrics, judge, text analyses), cli.
"""

__version__ = "0.1.0"
