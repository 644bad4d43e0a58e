from qpp.version import __version__  # noqa: F401
