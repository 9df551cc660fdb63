"""
Project-wide exception base for the workbench apps.
"""


class WorkbenchError(Exception):
    """
    Base class for every error raised by the workbench apps.

    Management commands map subclasses to distinct exit codes, see
    ``experiments_app.management.base``.
    """
