"""Exception hierarchy for toeplitz_forge.

Construction code raises these; verification code returns reports instead.
Each concrete error also derives from the closest builtin so callers that
catch ``ValueError`` or ``IndexError`` keep working.
"""

from typing import Any, Optional, Tuple


class ForgeError(Exception):
    """Base class for every error raised by toeplitz_forge"""


class InvalidModulusError(ForgeError, ValueError):
    """A lattice modulus is not a positive integer"""


class RefinementError(ForgeError, ValueError):
    """Requested lattice does not refine the top of the chain"""


class InternalConsistencyError(ForgeError, RuntimeError):
    """A tiling or bookkeeping identity failed; this is a defect"""


class LevelRangeError(ForgeError, IndexError):
    """A level index is outside the stored chain or sequence"""


class AugmentationError(ForgeError, ValueError):
    """Matrix cannot be augmented (a first-row entry is zero)"""


class ConstructionDefectError(ForgeError, RuntimeError):
    """An exact identity that holds by construction failed"""


class MultinomialDomainError(ForgeError, ValueError):
    """Multinomial coefficient requested with a negative part"""


class NeedsMoreLevelsError(ForgeError):
    """The chain ran out before the requested conditions were met"""

    def __init__(self, message: str, condition: Optional[str] = None, level: Optional[int] = None):
        super().__init__(message)
        self.condition = condition
        self.level = level


class FillabilityError(ForgeError, ValueError):
    """Counts of a column cannot be placed on the free cosets"""

    def __init__(self, message: str, level: int, column: int):
        super().__init__(message)
        self.level = level
        self.column = column


class MultiplicityError(ForgeError):
    """Ran out of distinct arrangements for repeated columns"""


class ConditionViolationError(ForgeError):
    """A block restriction matches no block of the level below"""

    def __init__(self, message: str, level: int, block: int, coset: Tuple[int, ...]):
        super().__init__(message)
        self.level = level
        self.block = block
        self.coset = coset


class DimensionMismatchError(ForgeError, ValueError):
    """Vector or matrix shapes do not line up"""


class NotWitnessedError(ForgeError):
    """An ordered-group factorization identity failed"""

    def __init__(self, message: str, location: Tuple[Any, ...], report: Any = None):
        super().__init__(message)
        self.location = location
        self.report = report


class FactorizationError(ForgeError, ValueError):
    """An index ratio has no factorization into d factors greater than one"""


class InputInvalidError(ForgeError, ValueError):
    """Input data violates a precondition (managedness, column bound)"""


class BundleFormatError(ForgeError, ValueError):
    """A bundle directory or JSON file is missing or malformed"""
