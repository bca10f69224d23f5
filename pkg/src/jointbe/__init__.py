"""jointbe: coupled FE-BE quasi-static frictional contact for jointed structures.

The package couples a reduced finite-element model of the surrounding
structure (Craig-Bampton, relative interface coordinates) with a fine
boundary-element description of the contact interface (elastic half-space
influence coefficients on a regular grid).  Static condensation collapses the
coupled problem onto the contact grid, where an incremental set-strategy plus
a projected Jacobi solver handles separation, stick and Coulomb slip.  On top
of the quasi-static solver sits a modal post-processing layer that extracts
amplitude-dependent natural frequencies and modal damping ratios from
hysteresis loops.
"""

__version__ = "0.1.0"
