"""Two-scale macro-micro analysis of the strongly magnetized Vlasov equation."""

from ._backend import available_backends, backend_name, use_backend

__version__ = "0.1.0"

__all__ = ["available_backends", "backend_name", "use_backend", "__version__"]
