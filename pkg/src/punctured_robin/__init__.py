"""Robin function of punctured domains: exact kernels, a collocation solver,
asymptotic predictions and a critical-point finder."""

__version__ = "0.1.0"
