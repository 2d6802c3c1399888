"""Optional numba acceleration.

The numeric kernels run through ``njit`` when numba is importable and fall
back to plain Python otherwise, so the package stays usable (slowly) in
stripped-down environments.
"""

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def deco(fn):
            return fn

        return deco
