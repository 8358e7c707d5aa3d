"""Knowledge-graph augmented abstractive summarisation with a cloze-question reward."""

__version__ = "0.1.0"
