"""Higher-order quantum λ-calculus: types, reduction and a GoI denotation."""

__version__ = "0.1.0"
