"""Exception hierarchy shared by all vibtpa modules.

Input problems (bad manifests, missing files, inconsistent channel metadata)
derive from :class:`InputError`; numerical/computation problems derive from
:class:`ComputationError`. The CLI maps the two families to exit codes 1 and 2.
"""


class TpaError(Exception):
    """Base class for all toolkit errors."""


class InputError(TpaError):
    """Problem with user-supplied data or configuration."""


class ComputationError(TpaError):
    """A computation could not produce a meaningful result."""


class InvalidConfigurationError(InputError):
    pass


class IncompatibleChannelsError(InputError):
    pass


class ManifestError(InputError):
    pass


class MissingFileError(ManifestError):
    pass


class BadColumnError(ManifestError):
    pass


class UnitMismatchError(ManifestError):
    pass


class DuplicateChannelError(ManifestError):
    pass


class SchemaViolationError(ManifestError):
    pass


class MissingInputError(ManifestError):
    pass


class CorruptTachoError(InputError):
    pass


class OutOfBandError(InputError):
    pass


class InsufficientDataError(ComputationError):
    pass


class InsufficientExcitationError(ComputationError):
    pass


class MissingOrderError(ComputationError):
    pass


class IncompatibleGridsError(ComputationError):
    pass


class EmptyResultError(ComputationError):
    pass
