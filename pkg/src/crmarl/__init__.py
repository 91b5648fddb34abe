"""Multi-agent credit re-assignment with DPO on a simulated UI environment."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("crmarl")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"
