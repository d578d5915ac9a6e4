"""
Comando analyze: de las poses a los marcadores, la transcripción y las predicciones
"""

import argparse
import logging
from pathlib import Path
from typing import Optional

from epikine.commands.common import (
    add_config_flags,
    add_detector_flags,
    add_pose_flags,
    add_tier_flags,
    pose_to_series,
    read_input,
    settings_from_args,
    stage,
)
from epikine.core.annotation_io import (
    EafDocument,
    read_eaf,
    segments_from_tier,
    tier_by_id,
    write_eaf,
)
from epikine.core.calibration import load_profile, normalize_series
from epikine.core.epistemic_classify import (
    SegmentInterval,
    analyze_segments,
    render_segments_text,
    render_summary_text,
    summarize_corpus,
)
from epikine.core.exports import events_csv, series_csv, summary_csv, write_atomic
from epikine.core.marker_detect import detect_all, events_to_tiers
from epikine.core.typannot_codec import encode, qualify_records, series_to_records, write_records
from epikine.errors import ProfileMismatchError
from epikine.schemas import Annotation, Tier

logger = logging.getLogger(__name__)

PREDICTION_TIER = "PREDICTION"


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "analyze",
        help="Detectar marcadores y clasificar los segmentos epistémicos",
    )
    parser.add_argument("--pose", required=True, help="JSON de poses (AlphaPose)")
    parser.add_argument("--profile", required=True, help="Perfil de calibración JSON")
    parser.add_argument("--eaf", help="Archivo ELAN con los segmentos epistémicos manuales")
    parser.add_argument("--language", help="Etiqueta de lengua de los segmentos (FR, LSF...)")
    parser.add_argument("--out", default=".", help="Directorio de salida")
    add_config_flags(parser)
    add_pose_flags(parser)
    add_detector_flags(parser)
    add_tier_flags(parser)
    parser.set_defaults(handler=run)


def _ms(segundos: float) -> int:
    return int(round(segundos * 1000))


def _tier_from(tier_id: str, intervalos) -> Tier:
    anotaciones = []
    for inicio, fin, valor in intervalos:
        a, b = _ms(inicio), _ms(fin)
        if b > a:
            anotaciones.append(Annotation(start_ms=a, end_ms=b, value=valor))
    return Tier(tier_id=tier_id, annotations=tuple(anotaciones))


def run(args: argparse.Namespace) -> int:
    """Ejecutar la cadena completa y escribir los archivos de salida en --out"""
    with stage("config"):
        settings = settings_from_args(args)
    with stage("calibration"):
        perfil = load_profile(args.profile)

    angulos, vel = pose_to_series(args.pose, settings, args.region, args.subject)

    with stage("calibration"):
        if perfil.subject_id != angulos.subject_id:
            raise ProfileMismatchError(
                f"El perfil es del sujeto {perfil.subject_id} y las poses de {angulos.subject_id}"
            )
        norm = normalize_series(angulos, perfil)

    documento: Optional[EafDocument] = None
    manual: Optional[Tier] = None
    with stage("annotation_io"):
        if args.eaf:
            documento = read_eaf(read_input(args.eaf))
            manual = tier_by_id(documento, settings.tier_episteme)
        intervalos = segments_from_tier(manual, settings.language) if manual else []
    if not intervalos:
        logger.warning(
            "Sin nivel %s con segmentos: se analiza el archivo completo como un único segmento",
            settings.tier_episteme,
        )
        inicio, fin = norm.span()
        intervalos = [SegmentInterval(start_s=inicio, end_s=fin, language=settings.language)]

    with stage("marker_detect"):
        eventos = detect_all(norm, vel, settings.detector)

    with stage("epistemic_classify"):
        analisis = analyze_segments(intervalos, norm, vel, settings.detector, settings.classifier)
        etiquetados = [(a.manual(), a.events) for a in analisis if a.manual() is not None]
        resumen = summarize_corpus(etiquetados, settings.classifier)

    with stage("typannot_codec"):
        registros = qualify_records(
            series_to_records(norm),
            eventos,
            settings.classifier.strong_amplitude_p,
            settings.detector.micro_osc_max_p2p,
        )

    niveles = [
        _tier_from(
            PREDICTION_TIER,
            [(a.prediction.start_s, a.prediction.end_s, a.prediction.label.value) for a in analisis],
        ),
        _tier_from(
            f"NOTCH_{norm.segment.value}_{norm.dof}",
            [(r.start_s, r.end_s, encode(r)) for r in registros],
        ),
        *events_to_tiers(eventos),
    ]
    if manual is not None:
        niveles.append(manual)

    with stage("annotation_io"):
        eaf = write_eaf(
            niveles,
            media_url=documento.media_url if documento else None,
            mime_type=documento.mime_type if documento else None,
            author=documento.author if documento else "",
        )

    texto_resumen = render_segments_text(analisis) + "\n" + render_summary_text(resumen)
    salida = Path(args.out)
    write_atomic(salida / "series.csv", series_csv(angulos, vel))
    write_atomic(salida / "events.csv", events_csv(eventos))
    write_atomic(salida / "records.txt", write_records(registros))
    write_atomic(salida / "predictions.eaf", eaf)
    write_atomic(salida / "summary.txt", texto_resumen)
    write_atomic(salida / "summary.csv", summary_csv(resumen))

    print(texto_resumen, end="")
    return 0
