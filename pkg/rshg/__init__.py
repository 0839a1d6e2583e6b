__version__ = "0.1.0"

__all__ = [
    "manifold",
    "spd_math",
    "problems",
    "directions",
    "schedules",
    "optimizer",
    "diagnostics",
    "config",
    "report",
    "cli",
    "errors",
    "utils",
]
