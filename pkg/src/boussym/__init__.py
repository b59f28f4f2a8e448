"""Symmetry analysis of the generalized Boussinesq equation
u_tt - u_xx + (f(u) + u_xx)_xx = 0.

Subpackages and modules:

* ``expr``: exact expressions (parser, printer, calculus, normal form, numerics)
* ``jet``: vector fields and their prolongations
* ``determining``: classical and nonclassical determining systems
* ``classify``: nonlinearity families and the affine-ansatz solver
* ``reduce``: similarity reductions and reduced ODEs
* ``closedform``: quadratures, the Weierstrass function, time profiles and
  nonclassical infinitesimals
* ``numverify``: ODE integration and PDE residuals
* ``cli``: command-line front end
"""

__version__ = "0.1.0"
