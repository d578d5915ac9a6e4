"""
Comando agree: acuerdo entre dos anotadores sobre un mismo nivel
"""

import argparse

from epikine.commands.common import add_config_flags, read_input, settings_from_args, stage
from epikine.core.annotation_io import agreement, read_eaf, render_agreement, tier_by_id
from epikine.errors import InputError
from epikine.schemas import Tier


def register(subparsers) -> None:
    parser = subparsers.add_parser("agree", help="Kappa por fotograma y solapamiento entre dos EAF")
    parser.add_argument("eaf_a", help="EAF del anotador A")
    parser.add_argument("eaf_b", help="EAF del anotador B")
    parser.add_argument("--tier", help="Nivel a comparar (por defecto, el nivel epistémico)")
    parser.add_argument("--fps", type=float, help="Frecuencia de rasterización")
    add_config_flags(parser)
    parser.set_defaults(handler=run)


def _tier(path: str, tier_id: str) -> Tier:
    nivel = tier_by_id(read_eaf(read_input(path)), tier_id)
    if nivel is None:
        raise InputError(f"{path} no tiene el nivel {tier_id}")
    return nivel


def run(args: argparse.Namespace) -> int:
    with stage("config"):
        settings = settings_from_args(args)
    tier_id = args.tier or settings.tier_episteme

    with stage("annotation_io"):
        informe = agreement(_tier(args.eaf_a, tier_id), _tier(args.eaf_b, tier_id), settings.fps)

    print(render_agreement(informe), end="")
    return 0
