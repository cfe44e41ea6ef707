"""sepkit: exact 1-D symmetric simple exclusion simulation with
tagged-particle/current tracking, the fBM(1/4) covariance and kernel
toolkit, deviation rate functions, macroscopic field functionals, and
the spectral variational minimizers tying them together."""

__version__ = "0.1.0"
