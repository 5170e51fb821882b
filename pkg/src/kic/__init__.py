"""Keyword-in-context toolkit.

Pipeline stages, each usable as a library or through the ``kic`` CLI:

- harvest: pull concordance pages for a wordlist and extract example
  sentences that use each keyword.
- dataset: deduplicate harvested records and split them by keyword into
  train/val/test files with a manifest.
- metrics: sentence-level BLEU and METEOR over a single canonical
  tokenizer.
- generation: five fixed prompt templates plus backends (an in-process
  stub and an HTTP client) that turn a keyword into candidate sentences.
- evaluation: score one or more backends against a reference split and
  render a comparison table.
- bot: a long-polling chat service that serves generated and harvested
  example sentences and keeps per-user word lists.
"""

__version__ = "0.1.0"
