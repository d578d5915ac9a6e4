"""
Comando plot: gráfica SVG de posición y velocidad con los marcadores
"""

import argparse
from pathlib import Path

from epikine.commands.common import add_config_flags, add_detector_flags, read_input, settings_from_args, stage
from epikine.core.calibration import load_profile, normalize_series
from epikine.core.exports import read_events_csv, read_series_csv, write_atomic
from epikine.core.plotting import plot_series


def register(subparsers) -> None:
    parser = subparsers.add_parser("plot", help="Dibujar series.csv y events.csv en un SVG")
    parser.add_argument("--series", required=True, help="series.csv escrito por analyze")
    parser.add_argument("--events", help="events.csv escrito por analyze")
    parser.add_argument("--profile", required=True, help="Perfil de calibración JSON")
    parser.add_argument("--fps", type=float, help="Frecuencia de la serie (por defecto, deducida del CSV)")
    parser.add_argument("--out", default=".", help="Directorio de salida")
    add_config_flags(parser)
    add_detector_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    with stage("config"):
        settings = settings_from_args(args)
    with stage("calibration"):
        perfil = load_profile(args.profile)

    with stage("exports"):
        angulos, vel = read_series_csv(
            read_input(args.series).decode("utf-8"), perfil.subject_id, args.fps
        )
        eventos = read_events_csv(read_input(args.events).decode("utf-8")) if args.events else []

    with stage("calibration"):
        norm = normalize_series(angulos, perfil)

    with stage("plotting"):
        svg = plot_series(norm, vel, eventos, settings.detector, title=f"{perfil.subject_id} COU FLXEXT")

    destino = write_atomic(Path(args.out) / "plot.svg", svg)
    print(destino)
    return 0
