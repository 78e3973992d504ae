from importlib.metadata import version as _v

try:
    __version__ = _v("artifact")
except Exception:  # not installed
    __version__ = "0.0.0"

