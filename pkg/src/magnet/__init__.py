"""Multi-agent RL with learned relevance graphs and typed message passing."""

__version__ = "0.1.0"
