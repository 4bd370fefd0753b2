"""Strichartz-Labor: numerische Werkbank fuer Strichartz-Abschaetzungen auf R x T_lambda."""

__version__ = "0.1.0"
