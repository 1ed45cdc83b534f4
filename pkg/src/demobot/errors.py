class StorageError(Exception):
    """Corrupt, truncated or version-mismatched episode/checkpoint files."""


class TrainingAborted(Exception):
    """Raised when training hits a non-finite loss; carries the dump path."""

    def __init__(self, message, dump_path=None):
        super().__init__(message)
        self.dump_path = dump_path


class AnnotationError(Exception):
    """Base for annotation parse failures."""


class MissingField(AnnotationError):
    def __init__(self, field):
        super().__init__(f"annotation is missing field {field!r}")
        self.field = field


class UnknownSafetyStatus(AnnotationError):
    def __init__(self, value):
        super().__init__(f"unknown safety status {value!r}")
        self.value = value
