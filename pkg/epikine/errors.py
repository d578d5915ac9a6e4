"""
Jerarquía de excepciones de epikine

Cada excepción lleva el código de salida que la CLI devuelve al capturarla:
2 para errores de entrada o de formato, 3 para errores de calibración y 4
para violaciones internas de invariantes.
"""

from typing import Optional


class EpikineError(Exception):
    """Error base del paquete"""

    exit_code = 4

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def __str__(self) -> str:
        if self.stage:
            return f"[{self.stage}] {self.message}"
        return self.message


class InputError(EpikineError, ValueError):
    """Datos de entrada inválidos: archivos, argumentos o formatos"""

    exit_code = 2


class ArgumentError(InputError):
    pass


class ConfigError(InputError):
    pass


class PoseParseError(InputError):
    """JSON de poses mal formado"""

    def __init__(self, message: str, byte_offset: Optional[int] = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class KeypointSchemaError(InputError):
    pass


class SubjectNotFoundError(InputError):
    pass


class EstimationError(InputError):
    """Falta un punto clave necesario para estimar el ángulo"""

    def __init__(self, message: str, keypoint: Optional[str] = None):
        super().__init__(message)
        self.keypoint = keypoint


class DegenerateGeometryError(EstimationError):
    pass


class EmptySeriesError(InputError):
    pass


class SeriesMismatchError(InputError):
    pass


class CodecError(InputError):
    pass


class RecordParseError(InputError):
    """Texto que no respeta la gramática Typannot ASCII"""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (columna {column})")
        self.detail = message
        self.column = column


class EafParseError(InputError):
    pass


class EafReferenceError(InputError):
    def __init__(self, message: str, slot_id: Optional[str] = None):
        super().__init__(message)
        self.slot_id = slot_id


class TierValidityError(InputError):
    pass


class UndefinedAgreementError(InputError):
    pass


class SpecError(InputError):
    pass


class CalibrationError(EpikineError):
    """Perfil de calibración inválido o incompatible"""

    exit_code = 3


class CalibrationOrderError(CalibrationError):
    pass


class CalibrationRangeError(CalibrationError):
    pass


class MissingLandmarkError(CalibrationError):
    def __init__(self, message: str, label: Optional[str] = None):
        super().__init__(message)
        self.label = label


class ProfileMismatchError(CalibrationError):
    pass
