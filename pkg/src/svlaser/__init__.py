"""svlaser: dense truncated-Fock-space simulation of a zero-diffusion squeezed-vacuum laser.

Layer map
---------
``hilbert``     operators, states, tensor products, partial traces
``algebra``     Bogoliubov pair (A, A^dag) and the generalized number basis
``models``      Hamiltonians and Lindblad generators (full Lambda system,
                effective bilinear coupling, laser rate equation, per-atom
                dissipative step, engineered-reservoir baseline)
``dynamics``    pure-state / density-matrix integrators, sequential atom
                injection, steady-state detection, Liouvillian null space
``observables`` excitations, quadrature variances, photon statistics, Mandel Q,
                squeezed-vacuum fidelity, Wigner function, coherences
``scenarios``   named end-to-end experiments emitting CSV data + run manifests
``cli``         command-line runner for the scenarios
"""

__version__ = "0.1.0"
