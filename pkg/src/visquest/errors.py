"""Exception types shared across the package.

Every error carries a short machine-parseable ``code`` so the CLI can emit
one-line diagnostics and exit nonzero.
"""


class VisquestError(Exception):
    code = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class InvalidInputError(VisquestError):
    code = "invalid-input"


class InvalidTaxonomyError(VisquestError):
    code = "invalid-taxonomy"


class NotFoundError(VisquestError):
    code = "not-found"


class DomainError(VisquestError):
    code = "domain-error"


class ConfigError(VisquestError):
    code = "config-error"


class DataError(VisquestError):
    code = "data-error"


class ConflictError(VisquestError):
    code = "conflict"
