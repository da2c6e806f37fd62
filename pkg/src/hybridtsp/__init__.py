"""Hybrid quantum-classical TSP solver.

K-means decomposition into clusters of at most four cities, a QUBO/Ising
encoding per cluster solved by VQE on a built-in statevector simulator,
nearest-end stitching, and random-forest guided 2-opt refinement, compared
against an MST baseline.
"""

__version__ = "0.1.0"
