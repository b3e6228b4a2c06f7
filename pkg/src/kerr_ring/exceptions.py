class KerrRingError(Exception):
    """Base class for solver and configuration failures."""


class ConfigError(KerrRingError):
    pass


class StepSizeUnderflow(KerrRingError):
    """Adaptive integration stalled, usually a sign of blown-up dynamics."""


class DegenerateState(KerrRingError, ValueError):
    pass


class DegenerateVariance(KerrRingError, ValueError):
    pass


class DimensionTooLarge(KerrRingError, MemoryError):
    def __init__(self, dim: int, limit: int):
        self.dim = dim
        self.limit = limit
        # complex128 state vector plus a sparse generator with ~14 nonzeros per row
        self.estimate_bytes = dim * 16 * 16
        super().__init__(
            f"Liouvillian dimension {dim} exceeds limit {limit} "
            f"(~{self.estimate_bytes / 2**20:.0f} MiB for the sparse generator); "
            "lower n_max or raise KERR_RING_MAX_DIM"
        )


class SingularSolve(KerrRingError):
    pass
