"""Initial-source reconstruction for damped hyperbolic waves in a
reflecting cavity.

The measured lateral Cauchy data of a wave field is expanded in an
orthonormal time basis, which turns the space-time problem into a coupled
elliptic system for the spatial mode coefficients.  That system is solved
as a regularized least-squares problem on a finite-difference grid, and
the initial source is assembled from the recovered modes.
"""

__version__ = "0.1.0"
