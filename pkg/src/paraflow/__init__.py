"""paraflow: a dyadic-analysis workbench.

Littlewood-Paley projectors and paraproduct operators on periodic grids,
exact cut/multicut combinatorics, the iterated-paraproduct regularity
structure with its coproducts, canonical models and bracket families, and
paracontrolled systems with their lift to modelled distributions.
"""

__version__ = "0.1.0"
