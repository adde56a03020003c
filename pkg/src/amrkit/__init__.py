"""Transition-based AMR parsing toolkit.

Core pieces: a PENMAN graph model (`amrkit.graph`), corpus ingestion
(`amrkit.corpus`), a heuristic aligner (`amrkit.aligner`), the shift-reduce
transition system and concept dictionary (`amrkit.transition`), the training
oracle (`amrkit.oracle`), embedding providers (`amrkit.embeddings`), feature
extraction (`amrkit.features`), feed-forward classifiers (`amrkit.network`),
the greedy parser (`amrkit.parser`), and a Smatch evaluator with fine-grained
sub-metrics (`amrkit.smatch`).  `amrkit.cli` wires everything into
subcommands.
"""

__version__ = "0.1.0"
