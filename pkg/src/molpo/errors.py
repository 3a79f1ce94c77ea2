"""Shared exception taxonomy.

Every failure mode the toolkit promises to distinguish gets its own class so
callers (and the CLI's exit-code mapping) can branch on type rather than on
message text. Module-specific refinements (checkpoint load errors, SMILES
parse errors) subclass these in their home modules.
"""


class MolpoError(Exception):
    """Base class for all toolkit errors."""


class ContractError(MolpoError):
    """A documented precondition was violated by the caller."""


class StateError(MolpoError):
    """An object was used after it was spent or outside its lifecycle."""


class NumericError(MolpoError):
    """A computation produced a non-finite value (NaN or infinity)."""


class LengthError(ContractError):
    """A sequence does not fit the model context window."""


class ConfigError(MolpoError):
    """A configuration value or combination of flags is invalid."""


class DataError(MolpoError):
    """An input record or file violates the documented data format."""


class OovError(DataError):
    """Text contains a character outside the vocabulary.

    Carries the offending character and its offset so error messages can
    point at the exact position.
    """

    def __init__(self, char: str, offset: int):
        super().__init__(f"character {char!r} at offset {offset} is not in the vocabulary")
        self.char = char
        self.offset = offset


class CompatibilityError(MolpoError):
    """Two models/checkpoints cannot be combined (names, shapes, or vocab differ)."""


class TrainingDivergedError(MolpoError):
    """Optimization produced a non-finite loss or gradient."""


class ScorerError(MolpoError):
    """An external scorer violated its wire protocol, failed, or timed out."""
