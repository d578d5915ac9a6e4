"""
epikine: cinemática FLXEXT del cuello y marcadores epistémicos
Interfaz de línea de comandos
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from epikine.commands import agree, analyze, calibrate, plot, synth_test
from epikine.errors import EpikineError

__version__ = "1.0.0"

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epikine",
        description="Análisis cinemático del cuello (FLXEXT) a partir de poses AlphaPose: "
        "calibración, marcadores epistémicos, transcripción Typannot y acuerdo ELAN.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        dest="log_level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Nivel de registro en stderr",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMANDO")
    subparsers.required = True

    # Registrar los comandos
    calibrate.register(subparsers)
    analyze.register(subparsers)
    plot.register(subparsers)
    agree.register(subparsers)
    synth_test.register(subparsers)
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, stream=sys.stderr, force=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Función principal: devuelve el código de salida"""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except EpikineError as e:
        print(str(e), file=sys.stderr)
        return e.exit_code
    except Exception as e:  # noqa: BLE001
        logging.getLogger(__name__).debug("Error interno", exc_info=True)
        print(f"[{args.command}] Error interno: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
