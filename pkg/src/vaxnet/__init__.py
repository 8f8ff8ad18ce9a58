"""Retweet-network communities and anti-vaccination language classifiers."""

__version__ = "0.1.0"
