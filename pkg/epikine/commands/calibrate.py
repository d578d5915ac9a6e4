"""
Comando calibrate: perfil del sujeto a partir del nivel de calibración ELAN
"""

import argparse
import logging
from pathlib import Path

from epikine.commands.common import (
    add_config_flags,
    add_pose_flags,
    add_tier_flags,
    pose_to_series,
    read_input,
    settings_from_args,
    stage,
)
from epikine.core.annotation_io import landmarks_from_tier, read_eaf, tier_by_id
from epikine.core.calibration import build_profile, render_correspondence, save_profile
from epikine.core.exports import write_atomic
from epikine.errors import MissingLandmarkError

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "calibrate",
        help="Construir el perfil de calibración del sujeto",
        description="Mide reposo y butées FLX/EXT en los instantes del nivel CALIB y "
        "escribe el perfil JSON con su tabla de correspondencias.",
    )
    parser.add_argument("--pose", required=True, help="JSON de poses (AlphaPose)")
    parser.add_argument("--eaf", required=True, help="Archivo ELAN con el nivel de calibración")
    parser.add_argument("--profile-out", dest="profile_out", help="Ruta del perfil (por defecto OUT/profile.json)")
    parser.add_argument("--out", default=".", help="Directorio de salida")
    add_config_flags(parser)
    add_pose_flags(parser)
    add_tier_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    """Ejecutar la calibración e imprimir la tabla de correspondencias"""
    with stage("config"):
        settings = settings_from_args(args)

    angulos, _ = pose_to_series(args.pose, settings, args.region, args.subject)

    with stage("annotation_io"):
        documento = read_eaf(read_input(args.eaf))

    with stage("calibration"):
        nivel = tier_by_id(documento, settings.tier_calib)
        if nivel is None:
            raise MissingLandmarkError(
                f"El archivo {args.eaf} no tiene el nivel de calibración {settings.tier_calib}",
                label=settings.tier_calib,
            )
        perfil = build_profile(angulos, landmarks_from_tier(nivel), angulos.subject_id)

    destino = Path(args.profile_out) if args.profile_out else Path(args.out) / "profile.json"
    write_atomic(destino, save_profile(perfil))
    print(render_correspondence(perfil), end="")
    return 0
