"""Fehlertypen fuer das Strichartz-Labor."""

from __future__ import annotations

from typing import Any


class LabError(RuntimeError):
    """Basisklasse aller fachlichen Fehler."""


class InvalidParameterError(LabError, ValueError):
    """Parameter ausserhalb des zulaessigen Bereichs oder nicht endlich."""


class LatticeMismatchError(LabError, ValueError):
    """Feld und Plan leben auf unterschiedlichen Gittern."""


class DegenerateInputError(LabError, ValueError):
    """Eingabe ist entartet (Nullfeld, konstante Sweep-Achse, leere Projektion)."""


class ResourceBudgetError(LabError):
    """Eine Rechnung wuerde das konfigurierte Budget ueberschreiten."""

    def __init__(self, message: str, required: float, budget: float) -> None:
        super().__init__(message)
        self.required = required
        self.budget = budget


class ComplexityBudgetError(ResourceBudgetError):
    """Komplexitaet einer Menge oder Summe ueber dem Budget."""


class RootIsolationError(LabError):
    """Nullstellen eines Schnittpolynoms konnten nicht isoliert werden."""


class BlowUpError(LabError):
    """Overflow/NaN im Zeitschritt; haelt den letzten gueltigen Zustand fest."""

    def __init__(self, message: str, last_valid_state: Any, step: int) -> None:
        super().__init__(message)
        self.last_valid_state = last_valid_state
        self.step = step


class QuadratureWarning(RuntimeWarning):
    """Adaptive Quadratur hat die geforderte Genauigkeit nicht erreicht."""


class AcceptanceFailure(LabError):
    """Mindestens ein angeforderter Akzeptanztest ist fehlgeschlagen."""

    def __init__(self, failures: list[dict[str, Any]]) -> None:
        names = ", ".join(str(item.get("check", "?")) for item in failures)
        super().__init__(f"Akzeptanztests fehlgeschlagen: {names}")
        self.failures = failures
