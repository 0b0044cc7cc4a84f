"""Toolkit for parsing occupational job titles into domain entities.

Covers corpus normalization and statistics, a vote-merged gazetteer with
inter-rater reliability, BIOES sequence labeling, CRF and BiLSTM-CRF taggers
trained from scratch, bidirectional-LM title embeddings, and an evaluation
and grid-search harness, all behind one command line tool.
"""

__version__ = "0.1.0"
