"""Offline contextual-embedding extraction for the AMR parsing toolkit.

Runs a frozen pretrained transformer encoder (BERT or RoBERTa family) over
CoNLL-U sentences, aligns sub-word pieces back to the corpus tokens, pools
per-token spans, and writes the binary ``AMRE`` embedding file the parser
loads at preprocessing time.  Feature extraction only: no fine-tuning, CPU
always works.
"""

__version__ = "0.1.0"
