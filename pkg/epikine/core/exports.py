"""
Exportación CSV de series, eventos y resúmenes, y escritura atómica de archivos
"""

import csv
import io
import logging
import os
import tempfile
from pathlib import Path
from typing import Optional, Sequence, Union

from pydantic import ValidationError

from epikine.core.epistemic_classify import SUMMARY_COLUMNS, CorpusSummary
from epikine.core.marker_detect import sort_events
from epikine.errors import InputError
from epikine.schemas import (
    AngleSample,
    AngleSeries,
    Hold,
    NodBurst,
    Notch,
    Quality,
    SpeedBand,
    SpeedLevel,
    VelocitySample,
    VelocitySeries,
)

logger = logging.getLogger(__name__)

SERIES_HEADER = ["t_s", "theta_deg", "v_deg_s", "quality"]
EVENTS_HEADER = ["kind", "start_s", "end_s", "attr1", "attr2", "attr3"]


def _num(value: float) -> str:
    texto = f"{value:.6f}"
    return "0.000000" if texto == "-0.000000" else texto


def _bool(value: bool) -> str:
    return "true" if value else "false"


def _parse_bool(text: str) -> bool:
    if text not in ("true", "false"):
        raise ValueError(f"Valor booleano inválido: {text!r}")
    return text == "true"


def _write_rows(header: list[str], rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _read_rows(text: str, header: list[str], nombre: str) -> list[tuple[int, list[str]]]:
    filas = list(csv.reader(io.StringIO(text)))
    if not filas or filas[0] != header:
        raise InputError(f"Cabecera de {nombre} inválida: se esperaba {','.join(header)}")
    salida = []
    for numero, fila in enumerate(filas[1:], start=2):
        if not fila:
            continue
        if len(fila) != len(header):
            raise InputError(f"{nombre}, línea {numero}: se esperaban {len(header)} columnas")
        salida.append((numero, fila))
    return salida


def series_csv(angle: AngleSeries, velocity: VelocitySeries) -> str:
    """
    CSV t_s,theta_deg,v_deg_s,quality con seis decimales

    Raises:
        InputError: Si las dos series no tienen las mismas marcas de tiempo
    """
    if len(angle) != len(velocity):
        raise InputError("Las series de ángulo y velocidad tienen longitudes distintas")
    filas = []
    for a, v in zip(angle.samples, velocity.samples):
        if abs(a.t_s - v.t_s) > 1e-9:
            raise InputError(f"Marcas de tiempo desalineadas en {a.t_s:.6f} s")
        filas.append([_num(a.t_s), _num(a.theta_deg), _num(v.v_deg_s), a.quality.value])
    return _write_rows(SERIES_HEADER, filas)


def read_series_csv(
    text: str, subject_id: str, fps: Optional[float] = None
) -> tuple[AngleSeries, VelocitySeries]:
    """
    Leer un CSV de series

    Args:
        text: Contenido del archivo
        subject_id: Sujeto al que pertenecen las series
        fps: Frecuencia; si falta se deduce del paso entre las dos primeras muestras

    Raises:
        InputError: Si el archivo está mal formado o no se puede deducir la frecuencia
    """
    angulos = []
    velocidades = []
    for numero, fila in _read_rows(text, SERIES_HEADER, "series.csv"):
        try:
            t = float(fila[0])
            calidad = Quality(fila[3])
            angulos.append(AngleSample(t_s=t, theta_deg=float(fila[1]), quality=calidad))
            velocidades.append(VelocitySample(t_s=t, v_deg_s=float(fila[2]), quality=calidad))
        except (ValueError, ValidationError) as e:
            raise InputError(f"series.csv, línea {numero}: {e}") from e

    if fps is None:
        if len(angulos) < 2:
            raise InputError("No se puede deducir la frecuencia con menos de dos muestras")
        fps = round(1.0 / (angulos[1].t_s - angulos[0].t_s), 3)
    try:
        return (
            AngleSeries(subject_id=subject_id, fps=fps, samples=tuple(angulos)),
            VelocitySeries(subject_id=subject_id, fps=fps, samples=tuple(velocidades)),
        )
    except ValidationError as e:
        raise InputError(f"series.csv no es una serie uniforme: {e}") from e


def _event_row(event) -> list[str]:
    base = [event.kind, _num(event.start_s), _num(event.end_s)]
    if isinstance(event, Hold):
        return base + [event.median_notch.name, _bool(event.non_neutral), _bool(event.micro_oscillation)]
    if isinstance(event, NodBurst):
        return base + [str(event.cycles), _bool(event.crosses_neutral), _num(event.max_peak_to_peak_p)]
    return base + [event.band.value, _num(event.stat_deg_s), _num(event.peak_deg_s)]


def events_csv(events: Sequence) -> str:
    """
    Eventos con atributos por tipo:

    - HOLD: median_notch, non_neutral, micro_oscillation
    - NOD: cycles, crosses_neutral, max_peak_to_peak_p
    - SPEED: band, stat_deg_s, peak_deg_s
    """
    return _write_rows(EVENTS_HEADER, [_event_row(e) for e in sort_events(events)])


def read_events_csv(text: str) -> list:
    """
    Raises:
        InputError: Si una fila no corresponde a ningún tipo de evento
    """
    eventos = []
    for numero, fila in _read_rows(text, EVENTS_HEADER, "events.csv"):
        kind, inicio, fin, a1, a2, a3 = fila
        try:
            start_s, end_s = float(inicio), float(fin)
            if kind == "HOLD":
                evento = Hold(
                    start_s=start_s,
                    end_s=end_s,
                    duration_s=end_s - start_s,
                    median_notch=Notch[a1],
                    non_neutral=_parse_bool(a2),
                    micro_oscillation=_parse_bool(a3),
                )
            elif kind == "NOD":
                evento = NodBurst(
                    start_s=start_s,
                    end_s=end_s,
                    cycles=int(a1),
                    crosses_neutral=_parse_bool(a2),
                    max_peak_to_peak_p=float(a3),
                    peak_speed_deg_s=0.0,
                )
            elif kind == "SPEED":
                evento = SpeedBand(
                    start_s=start_s,
                    end_s=end_s,
                    band=SpeedLevel(a1),
                    stat_deg_s=float(a2),
                    peak_deg_s=float(a3),
                )
            else:
                raise ValueError(f"Tipo de evento desconocido: {kind!r}")
        except (KeyError, ValueError, ValidationError) as e:
            raise InputError(f"events.csv, línea {numero}: {e}") from e
        eventos.append(evento)
    return eventos


def summary_csv(summary: CorpusSummary) -> str:
    filas = [
        [c.language, c.label.value, str(c.total)] + [str(getattr(c, col)) for col in SUMMARY_COLUMNS]
        for c in summary.cells
    ]
    return _write_rows(["language", "label", "total", *SUMMARY_COLUMNS], filas)


def write_atomic(path: Union[str, Path], data: Union[str, bytes]) -> Path:
    """Escribir en un temporal del mismo directorio y renombrar"""
    destino = Path(path)
    destino.parent.mkdir(parents=True, exist_ok=True)
    contenido = data.encode("utf-8") if isinstance(data, str) else data
    descriptor, temporal = tempfile.mkstemp(dir=destino.parent, prefix=f".{destino.name}.")
    try:
        with os.fdopen(descriptor, "wb") as f:
            f.write(contenido)
        os.replace(temporal, destino)
    except BaseException:
        if os.path.exists(temporal):
            os.unlink(temporal)
        raise
    logger.info("Escrito %s (%d bytes)", destino, len(contenido))
    return destino
