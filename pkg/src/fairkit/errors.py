"""Exception base shared by every fairkit module."""


class FairkitError(Exception):
    """Base class; ``module`` names the owning module for CLI error lines."""

    module = "fairkit"

    @property
    def code(self):
        return f"{self.module}.{type(self).__name__}"
