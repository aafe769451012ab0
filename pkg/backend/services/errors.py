"""
Error types raised by the re-localization services.

DataError subclasses describe bad input files or incompatible data and map to
CLI exit code 2; ContractError subclasses describe violated preconditions on
call arguments.
"""

from pathlib import Path
from typing import Optional, Union


class RelocalizationError(Exception):
    """Base class for every error raised by this package"""


class DataError(RelocalizationError):
    """Input data is malformed or inconsistent"""

    def __init__(
        self,
        message: str,
        *,
        path: Optional[Union[str, Path]] = None,
        frame: Optional[int] = None,
    ):
        self.path = str(path) if path is not None else None
        self.frame = frame
        context = []
        if self.path is not None:
            context.append(f"file {self.path}")
        if frame is not None:
            context.append(f"frame {frame}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)


class FeatureFormatError(DataError):
    """Feature file header or body does not match the declared format"""


class DimensionMismatchError(DataError):
    """Vectors from incompatible databases were combined"""


class ZeroVectorError(DataError):
    """A feature vector has zero norm and cannot be normalized"""


class NormToleranceError(DataError):
    """A feature vector norm deviates from 1 by more than the ingest tolerance"""


class CountMismatchError(DataError):
    """Declared and actual row counts differ"""


class GeotagError(DataError):
    """Geotag file is missing frames, repeats frames or holds bad coordinates"""


class GroundTruthError(DataError):
    """Ground-truth file is malformed or references out-of-range indices"""


class ContractError(RelocalizationError, ValueError):
    """A call argument violates the operation's precondition"""


class SilhouetteContractError(ContractError):
    pass


class MedoidCountError(ContractError):
    """Medoid count outside [2, N - 1]"""


class SwapArgumentError(ContractError):
    pass


class KeyframeSetError(ContractError):
    pass


class ToleranceRuleError(ContractError):
    pass


class StrategyNotApplicableError(RelocalizationError):
    """The keyframe strategy needs data the database does not carry"""


class SeparationInfeasibleError(RelocalizationError):
    """Cluster centers could not be placed at the requested separation"""
