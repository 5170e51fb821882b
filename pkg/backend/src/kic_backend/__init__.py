"""Model backend for the KIC toolkit.

Fine-tunes seq2seq models on datasets in the builder's split-file
format and serves any loadable checkpoint or model name behind the
generation wire protocol (POST /generate, GET /healthz). The package is
deliberately independent of the toolkit's code; the only contracts
shared with it are the wire protocol and the dataset file schema.
"""

__version__ = "0.1.0"
