"""
Configuración de epikine

Los valores por defecto viven en modelos Pydantic. Un archivo opcional en
formato dotenv (claves EPIKINE_*) puede sobrescribirlos; las banderas de la
CLI tienen la última palabra. Nunca se leen variables del entorno del proceso.
"""

import logging
from pathlib import Path
from typing import Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from epikine.errors import ConfigError
from epikine.schemas import Estimator, KeypointSchemaName

logger = logging.getLogger(__name__)

ENV_PREFIX = "EPIKINE_"


class DetectorConfig(BaseModel):
    """Umbrales de los detectores de marcadores"""

    model_config = ConfigDict(frozen=True)

    hold_min_s: float = Field(default=2.0, gt=0)
    hold_v_max: float = Field(default=5.0, gt=0)
    nod_min_peak_to_peak: float = Field(default=0.0625, gt=0)
    speed_high: float = Field(default=40.0, gt=0)
    speed_low: float = Field(default=20.0, gt=0)
    speed_percentile: float = Field(default=0.90, gt=0, le=1)
    micro_osc_max_p2p: float = Field(default=0.125, gt=0)
    nod_burst_gap_s: float = Field(default=0.5, gt=0)
    nod_max_stroke_s: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def validar_bandas(self):
        if not self.speed_low < self.speed_high:
            raise ValueError(
                f"speed_low ({self.speed_low}) debe ser menor que speed_high ({self.speed_high})"
            )
        return self


class ClassifierConfig(BaseModel):
    """Reglas de puntuación de segmentos"""

    model_config = ConfigDict(frozen=True)

    nod_min_cycles: int = Field(default=2, ge=1)
    strong_amplitude_p: float = Field(default=0.625, gt=0, le=2)


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True)

    fps: float = Field(default=25.0, gt=0)
    schema_name: KeypointSchemaName = KeypointSchemaName.COCO17
    estimator: Estimator = Estimator.SAGITTAL_PROXY
    smooth_window: int = Field(default=5, ge=1)
    max_gap_frames: int = Field(default=10, ge=0)
    low_confidence: float = Field(default=0.3, ge=0, le=1)
    tier_episteme: str = "EPISTEME"
    tier_calib: str = "CALIB"
    language: str = "FR"
    detector: DetectorConfig = DetectorConfig()
    classifier: ClassifierConfig = ClassifierConfig()

    @model_validator(mode="after")
    def validar_ventana(self):
        if self.smooth_window % 2 == 0:
            raise ValueError("La ventana de suavizado debe ser impar")
        return self


# Claves del archivo → (sección, campo)
_FILE_KEYS = {
    "FPS": (None, "fps"),
    "SCHEMA": (None, "schema_name"),
    "ESTIMATOR": (None, "estimator"),
    "SMOOTH": (None, "smooth_window"),
    "MAX_GAP": (None, "max_gap_frames"),
    "LOW_CONFIDENCE": (None, "low_confidence"),
    "TIER_EPISTEME": (None, "tier_episteme"),
    "TIER_CALIB": (None, "tier_calib"),
    "LANGUAGE": (None, "language"),
    "HOLD_MIN_S": ("detector", "hold_min_s"),
    "HOLD_VMAX": ("detector", "hold_v_max"),
    "NOD_MIN_P2P": ("detector", "nod_min_peak_to_peak"),
    "SPEED_HIGH": ("detector", "speed_high"),
    "SPEED_LOW": ("detector", "speed_low"),
    "SPEED_PERCENTILE": ("detector", "speed_percentile"),
    "MICRO_OSC_MAX_P2P": ("detector", "micro_osc_max_p2p"),
    "NOD_BURST_GAP_S": ("detector", "nod_burst_gap_s"),
    "NOD_MAX_STROKE_S": ("detector", "nod_max_stroke_s"),
    "NOD_MIN_CYCLES": ("classifier", "nod_min_cycles"),
    "STRONG_AMPLITUDE_P": ("classifier", "strong_amplitude_p"),
}

_ALIASES = {"proxy": "SAGITTAL_PROXY", "interior": "INTERIOR_ANGLE"}


def _normalize_value(field: str, value: str) -> str:
    if field == "estimator":
        return _ALIASES.get(value.lower(), value.upper())
    if field == "schema_name":
        return value.upper()
    return value


def build_settings(
    overrides: Optional[dict] = None, base: Optional[Settings] = None
) -> Settings:
    """
    Combinar unos valores base con sobrescrituras planas o por sección

    Args:
        overrides: Diccionario {campo: valor} o {"detector": {...}}; los valores None se ignoran
        base: Configuración de partida (por defecto, la configuración de fábrica)

    Returns:
        Settings validados

    Raises:
        ConfigError: Si algún valor no cumple las restricciones
    """
    datos = (base or Settings()).model_dump()
    for clave, valor in (overrides or {}).items():
        if valor is None:
            continue
        if clave in ("detector", "classifier"):
            datos[clave].update({k: v for k, v in valor.items() if v is not None})
        else:
            datos[clave] = valor
    try:
        return Settings.model_validate(datos)
    except ValidationError as e:
        raise ConfigError(f"Configuración inválida: {e}") from e


def load_settings(path: Optional[Union[str, Path]] = None) -> Settings:
    """
    Cargar la configuración desde un archivo dotenv opcional

    Args:
        path: Ruta del archivo; si es None se usan los valores por defecto

    Returns:
        Settings validados

    Raises:
        ConfigError: Si el archivo no existe o contiene claves o valores inválidos
    """
    if path is None:
        return Settings()

    ruta = Path(path)
    if not ruta.is_file():
        raise ConfigError(f"No existe el archivo de configuración: {ruta}")

    valores = dotenv_values(ruta)
    overrides: dict = {"detector": {}, "classifier": {}}
    for clave, valor in valores.items():
        if not clave.startswith(ENV_PREFIX):
            logger.warning("Clave ignorada en %s: %s", ruta, clave)
            continue
        nombre = clave[len(ENV_PREFIX):]
        if nombre not in _FILE_KEYS:
            raise ConfigError(f"Clave de configuración desconocida: {clave}")
        if valor is None:
            raise ConfigError(f"La clave {clave} no tiene valor")
        seccion, campo = _FILE_KEYS[nombre]
        valor = _normalize_value(campo, valor)
        if seccion is None:
            overrides[campo] = valor
        else:
            overrides[seccion][campo] = valor

    logger.info("Configuración cargada desde %s", ruta)
    return build_settings(overrides)
