"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

`HAVE_COMPILED` reports which implementation is active. Both expose the same
three functions with identical semantics; the test suite runs the fallback
against the extension whenever the extension built.
"""

try:
    from . import _kernels as _impl

    HAVE_COMPILED = True
except ImportError:  # extension not built; pure-Python install
    from . import _kernels_np as _impl

    HAVE_COMPILED = False

fwht_inplace = _impl.fwht_inplace
packed_matvec = _impl.packed_matvec
packed_rmatvec = _impl.packed_rmatvec
