"""Core-Komponenten fuer das Projekt."""
