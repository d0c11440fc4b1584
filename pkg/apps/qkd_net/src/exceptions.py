class QkdNetworkError(Exception):
    """Base exception for network simulation errors"""
    pass

class PlacementError(QkdNetworkError):
    """Raised when trusted nodes cannot be placed on the lattice"""
    pass

class ConfigError(QkdNetworkError):
    """Raised when a simulation config is malformed or out of range"""
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")

class DistillationInputError(QkdNetworkError):
    """Raised when post-processing receives invalid noise data"""
    pass

class SimulationError(QkdNetworkError):
    """Raised when a simulation run fails or violates a routing invariant"""
    pass

class ResultsWriteError(QkdNetworkError):
    """Raised when results cannot be written"""
    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"Failed to write results to {self.path}: {message}")
