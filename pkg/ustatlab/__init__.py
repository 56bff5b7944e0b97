__all__ = [
    "core_models",
    "decomp",
    "engine",
    "hoeffding",
    "interp",
    "norms",
    "pyd_models",
    "spaces",
]

__version__ = "0.1.0"
