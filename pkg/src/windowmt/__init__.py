"""Character-level, attention-free neural translation for text streams.

Subpackages cover the numeric core (hand-derived LSTM gradients), text and
vocabulary handling, the seq2seq model, multi-task parameter sharing,
sliding-window stream translation with vote-based merging, and trace-vector
analysis (clustering, search, story segmentation).
"""

__version__ = "0.1.0"
