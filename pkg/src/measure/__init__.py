"""Masse semi-algebraischer Mengen auf R^2 und R x Z_{1/lambda}."""
