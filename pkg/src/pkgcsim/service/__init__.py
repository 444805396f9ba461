"""HTTP service wrapping the simulator and analyzers.

``handlers`` holds the pure request-to-report functions; ``app`` exposes
them as FastAPI endpoints; ``schemas`` defines the request models.  The
CLI calls the same handlers in-process, so both front ends emit identical
reports.
"""

from pkgcsim.service.app import create_app

__all__ = ["create_app"]
