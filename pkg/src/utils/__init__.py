"""Utility-Paket fuer Hilfsfunktionen."""
