"""Zaehlerbasierte Zufallsstroeme fuer reproduzierbare Ensembles."""

from __future__ import annotations

import hashlib

import numpy as np

# Wird in jede Report-Metadatei geschrieben.
ALGORITHM_ID = "numpy.random.Philox(4x64-10)+SeedSequence"


def _key_to_int(key: object) -> int:
    if isinstance(key, (int, np.integer)) and key >= 0:
        return int(key)
    digest = hashlib.sha256(repr(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_generator(seed: int, *keys: object) -> np.random.Generator:
    """Generator fuer die Zelle (seed, keys); gleiche Eingabe ergibt den gleichen Strom."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_to_int(key) for key in keys))
    return np.random.Generator(np.random.Philox(sequence))


def complex_gaussian(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Standard-komplexe Gaussvariablen (Real- und Imaginaerteil je N(0, 1/2))."""
    real = rng.standard_normal(shape)
    imag = rng.standard_normal(shape)
    return (real + 1j * imag) / np.sqrt(2.0)
