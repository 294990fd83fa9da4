"""Mixed-initiative conversational passage retrieval engine."""

__version__ = "0.1.0"
