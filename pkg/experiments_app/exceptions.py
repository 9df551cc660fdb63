from core.exceptions import WorkbenchError


class MissingInputError(WorkbenchError, FileNotFoundError):
    """
    Raised when a command's input file does not exist.

    Attributes:
        path (Path): The missing file.
    """

    def __init__(self, path):
        super().__init__(f'missing input file: {path}')
        self.path = path


class InvalidInputError(WorkbenchError, ValueError):
    """
    Raised when an input or config file fails schema validation.

    Attributes:
        source (str): File the payload came from.
        errors (dict): Field name to messages, as produced by a serializer.
    """

    def __init__(self, source, errors):
        super().__init__(f'{source}: {errors}')
        self.source = source
        self.errors = errors
