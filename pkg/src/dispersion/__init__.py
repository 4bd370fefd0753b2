"""Dispersive Fluesse, Funktionale und Zeitschrittverfahren."""
