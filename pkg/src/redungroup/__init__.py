"""Automatic grouping of redundant actuator/sensor channels.

Pipeline: simulate (or ingest) channel readings, train an autoencoder,
fuse its decoder weight structure with spatial distances into a weighted
relational graph, and partition the graph with a constrained randomized
search. The evaluation harness scores groupings against ground truth and
reproduces the standard comparison experiments.
"""

__version__ = "0.1.0"
