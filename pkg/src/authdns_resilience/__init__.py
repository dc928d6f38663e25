"""Resilience assessment of authoritative DNS infrastructure.

Pipeline: collect a :class:`~authdns_resilience.schema.DomainRecord`, derive
18 attributes, score them on a five-point scale and aggregate the scores up
the primary/authoritative hierarchy.
"""

__version__ = "0.1.0"
