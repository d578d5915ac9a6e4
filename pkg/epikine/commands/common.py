"""
Piezas compartidas por los comandos: banderas, configuración, etapas y la
cadena poses → ángulos → velocidad
"""

import argparse
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

from pydantic import ValidationError

from epikine.config.settings import Settings, build_settings, load_settings
from epikine.core.kinematics import angle_series, smooth, velocity
from epikine.core.pose_ingest import (
    choose_default_subject,
    fill_gaps,
    parse_pose_file,
    select_subject,
)
from epikine.errors import ArgumentError, EpikineError, InputError
from epikine.schemas import AngleSeries, DetectionRegion, KeypointSchema, VelocitySeries

logger = logging.getLogger(__name__)

_ESTIMATORS = {"proxy": "SAGITTAL_PROXY", "interior": "INTERIOR_ANGLE"}


@contextmanager
def stage(nombre: str) -> Iterator[None]:
    """Etiquetar con `nombre` los errores del paquete que aún no tienen etapa"""
    try:
        yield
    except EpikineError as e:
        if e.stage is None:
            e.stage = nombre
        raise


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Archivo de configuración (formato dotenv, claves EPIKINE_*)")


def add_pose_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--schema", choices=["coco17", "halpe26"], help="Esquema de puntos clave")
    parser.add_argument("--fps", type=float, help="Fotogramas por segundo del vídeo")
    parser.add_argument("--estimator", choices=sorted(_ESTIMATORS), help="Estimador del ángulo FLXEXT")
    parser.add_argument("--region", help="Región del locutor x,y,w,h en píxeles")
    parser.add_argument("--subject", help="Identificador del sujeto (por defecto, el nombre del archivo)")
    parser.add_argument("--max-gap", type=int, dest="max_gap", help="Hueco máximo a interpolar (fotogramas)")
    parser.add_argument("--smooth", type=int, help="Ventana de suavizado (fotogramas, impar)")


def add_detector_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--hold-min-s", type=float, dest="hold_min_s", help="Duración mínima de una tenue")
    parser.add_argument("--hold-vmax", type=float, dest="hold_v_max", help="Velocidad máxima de una tenue (°/s)")
    parser.add_argument("--speed-high", type=float, dest="speed_high", help="Umbral de velocidad alta (°/s)")
    parser.add_argument("--speed-low", type=float, dest="speed_low", help="Umbral de velocidad baja (°/s)")


def add_tier_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tier-episteme", dest="tier_episteme", help="Nivel ELAN de segmentos epistémicos")
    parser.add_argument("--tier-calib", dest="tier_calib", help="Nivel ELAN de calibración")


def settings_from_args(args: argparse.Namespace) -> Settings:
    """
    Valores de fábrica < archivo --config < banderas

    Raises:
        ConfigError: Si el archivo o alguna bandera no son válidos
    """
    base = load_settings(getattr(args, "config", None))

    def valor(nombre: str):
        return getattr(args, nombre, None)

    overrides = {
        "fps": valor("fps"),
        "schema_name": valor("schema").upper() if valor("schema") else None,
        "estimator": _ESTIMATORS.get(valor("estimator")) if valor("estimator") else None,
        "smooth_window": valor("smooth"),
        "max_gap_frames": valor("max_gap"),
        "tier_episteme": valor("tier_episteme"),
        "tier_calib": valor("tier_calib"),
        "language": valor("language"),
        "detector": {
            "hold_min_s": valor("hold_min_s"),
            "hold_v_max": valor("hold_v_max"),
            "speed_high": valor("speed_high"),
            "speed_low": valor("speed_low"),
        },
    }
    return build_settings(overrides, base)


def read_input(path: str) -> bytes:
    """
    Raises:
        InputError: Si el archivo no se puede leer
    """
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"No se puede leer {path}: {e}") from e


def pose_to_series(
    pose_path: str,
    settings: Settings,
    region: Optional[str] = None,
    subject_id: Optional[str] = None,
) -> tuple[AngleSeries, VelocitySeries]:
    """
    Cadena completa desde el JSON de poses hasta la serie suavizada y su velocidad

    Returns:
        (ángulos suavizados, velocidad)
    """
    subject_id = subject_id or Path(pose_path).stem
    datos = read_input(pose_path)

    with stage("pose_ingest"):
        tracks = parse_pose_file(datos, KeypointSchema.for_name(settings.schema_name), settings.fps)
        if region:
            try:
                zona = DetectionRegion.parse(region)
            except (ValueError, ValidationError) as e:
                raise ArgumentError(f"Región inválida {region!r}: {e}") from e
            track = select_subject(tracks, zona)
        else:
            track = choose_default_subject(tracks)
        track = fill_gaps(track, settings.max_gap_frames)

    with stage("kinematics"):
        crudo = angle_series(track, settings.estimator, settings.low_confidence, subject_id)
        suave = smooth(crudo, settings.smooth_window)
        vel = velocity(suave)

    logger.info("Serie de %d muestras para el sujeto %s", len(suave), subject_id)
    return suave, vel
