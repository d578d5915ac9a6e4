"""
Clasificación epistémica de segmentos

Puntúa cada segmento con los marcadores que contiene (certeza: asentimientos
que cruzan la posición neutra y velocidad alta; incertidumbre: tenues fuera
de la posición neutra y velocidad baja) y resume un corpus anotado en
tablas de frecuencias por lengua y etiqueta.
"""

import logging
from typing import Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from epikine.config.settings import ClassifierConfig, DetectorConfig
from epikine.core.marker_detect import (
    detect_holds,
    detect_nods,
    event_label,
    sort_events,
    speed_profile,
)
from epikine.errors import ArgumentError
from epikine.schemas import (
    EpistemicLabel,
    EpistemicSegment,
    Evidence,
    Hold,
    MarkerEvent,
    NodBurst,
    NormalizedSeries,
    Notch,
    SegmentSource,
    SpeedBand,
    SpeedLevel,
    VelocitySeries,
)

logger = logging.getLogger(__name__)

ALL_LANGUAGES = "ALL"

RULE_NOD = "NOD_CROSSES_NEUTRAL"
RULE_HIGH = "SPEED_HIGH"
RULE_HOLD = "HOLD_NON_NEUTRAL"
RULE_LOW = "SPEED_LOW"


class SegmentInterval(BaseModel):
    """Intervalo a clasificar, con la etiqueta manual si existe"""

    model_config = ConfigDict(frozen=True)

    start_s: float
    end_s: float
    label: Optional[EpistemicLabel] = None
    language: Optional[str] = None

    @model_validator(mode="after")
    def validar_intervalo(self):
        if not self.start_s < self.end_s:
            raise ValueError("El segmento debe tener duración positiva")
        return self


class SegmentAnalysis(BaseModel):
    model_config = ConfigDict(frozen=True)

    interval: SegmentInterval
    prediction: EpistemicSegment
    events: tuple[MarkerEvent, ...]

    def manual(self) -> Optional[EpistemicSegment]:
        """Segmento MANUAL equivalente, si el intervalo trae etiqueta"""
        if self.interval.label is None:
            return None
        return EpistemicSegment(
            start_s=self.interval.start_s,
            end_s=self.interval.end_s,
            label=self.interval.label,
            source=SegmentSource.MANUAL,
            language=self.interval.language,
        )


def events_in(start_s: float, end_s: float, events) -> list:
    """Eventos cuyo punto medio cae en [start_s, end_s)"""
    return [e for e in events if start_s <= e.midpoint < end_s]


def score_segment(
    start_s: float,
    end_s: float,
    events,
    cfg: Optional[ClassifierConfig] = None,
    language: Optional[str] = None,
) -> EpistemicSegment:
    """
    Etiqueta predicha de un segmento

    Returns:
        EpistemicSegment PREDICTED con puntuaciones y evidencias
    """
    cfg = cfg or ClassifierConfig()
    dentro = sort_events(events_in(start_s, end_s, events))

    evidencias: list[Evidence] = []
    reglas = {
        RULE_NOD: [
            e
            for e in dentro
            if isinstance(e, NodBurst) and e.cycles >= cfg.nod_min_cycles and e.crosses_neutral
        ],
        RULE_HIGH: [e for e in dentro if isinstance(e, SpeedBand) and e.band == SpeedLevel.HIGH],
        RULE_HOLD: [e for e in dentro if isinstance(e, Hold) and e.non_neutral],
        RULE_LOW: [e for e in dentro if isinstance(e, SpeedBand) and e.band == SpeedLevel.LOW],
    }
    for regla, eventos in reglas.items():
        evidencias.extend(Evidence(event=e, rule=regla) for e in eventos)

    cert = int(bool(reglas[RULE_NOD])) + int(bool(reglas[RULE_HIGH]))
    incert = int(bool(reglas[RULE_HOLD])) + int(bool(reglas[RULE_LOW]))
    if cert > incert:
        label = EpistemicLabel.CERT
    elif incert > cert:
        label = EpistemicLabel.INCERT
    else:
        label = EpistemicLabel.UNDETERMINED

    return EpistemicSegment(
        start_s=start_s,
        end_s=end_s,
        label=label,
        source=SegmentSource.PREDICTED,
        evidence=tuple(evidencias),
        cert_score=cert,
        incert_score=incert,
        language=language,
    )


def _slice_velocity(vel: VelocitySeries, start_s: float, end_s: float) -> VelocitySeries:
    muestras = tuple(s for s in vel.samples if start_s - 1e-9 <= s.t_s < end_s - 1e-9)
    return vel.model_copy(update={"samples": muestras})


def analyze_segments(
    intervals: Sequence[SegmentInterval],
    norm: NormalizedSeries,
    vel: VelocitySeries,
    detector_cfg: Optional[DetectorConfig] = None,
    classifier_cfg: Optional[ClassifierConfig] = None,
) -> list[SegmentAnalysis]:
    """
    Detectar y puntuar cada segmento

    Tenues y asentimientos se detectan una vez sobre la serie completa y se
    asignan por punto medio; la banda de velocidad se calcula con las muestras
    de cada segmento.
    """
    detector_cfg = detector_cfg or DetectorConfig()
    classifier_cfg = classifier_cfg or ClassifierConfig()
    holds = detect_holds(norm, vel, detector_cfg)
    nods = detect_nods(norm, vel, detector_cfg)

    analisis = []
    for intervalo in intervals:
        eventos = events_in(intervalo.start_s, intervalo.end_s, list(holds) + list(nods))
        tramo = _slice_velocity(vel, intervalo.start_s, intervalo.end_s)
        if len(tramo):
            band = speed_profile(tramo, holds, detector_cfg)
            # La banda cubre el segmento completo
            eventos.append(band.model_copy(update={"start_s": intervalo.start_s, "end_s": intervalo.end_s}))
        eventos = sort_events(eventos)
        prediccion = score_segment(
            intervalo.start_s, intervalo.end_s, eventos, classifier_cfg, intervalo.language
        )
        analisis.append(SegmentAnalysis(interval=intervalo, prediction=prediccion, events=tuple(eventos)))

    logger.info("%d segmentos clasificados", len(analisis))
    return analisis


class SummaryCell(BaseModel):
    """Recuentos de segmentos por familia de marcador en una celda (lengua, etiqueta)"""

    model_config = ConfigDict(frozen=True)

    language: str
    label: EpistemicLabel
    total: int = Field(ge=0)
    nods: int = 0
    neutral_nods: int = 0
    strong_nods: int = 0
    holds: int = 0
    non_neutral_holds: int = 0
    neutral_holds: int = 0
    micro_holds: int = 0
    high: int = 0
    low: int = 0

    @model_validator(mode="after")
    def validar_recuentos(self):
        for columna in SUMMARY_COLUMNS:
            if getattr(self, columna) > self.total:
                raise ValueError(f"{columna} supera el total de segmentos ({self.total})")
        return self

    def fraction(self, column: str) -> str:
        return f"{getattr(self, column)}/{self.total}"


SUMMARY_COLUMNS = (
    "nods",
    "neutral_nods",
    "strong_nods",
    "holds",
    "non_neutral_holds",
    "neutral_holds",
    "micro_holds",
    "high",
    "low",
)


class CorpusSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    cells: tuple[SummaryCell, ...] = ()

    def cell(self, language: str, label: EpistemicLabel) -> Optional[SummaryCell]:
        for c in self.cells:
            if c.language == language and c.label == label:
                return c
        return None


def _flags(events, cfg: ClassifierConfig) -> dict[str, bool]:
    nods = [e for e in events if isinstance(e, NodBurst)]
    holds = [e for e in events if isinstance(e, Hold)]
    bandas = [e for e in events if isinstance(e, SpeedBand)]
    return {
        "nods": bool(nods),
        "neutral_nods": any(e.crosses_neutral for e in nods),
        "strong_nods": any(e.max_peak_to_peak_p >= cfg.strong_amplitude_p for e in nods),
        "holds": bool(holds),
        "non_neutral_holds": any(e.non_neutral for e in holds),
        "neutral_holds": any(e.median_notch == Notch.NEUTRAL for e in holds),
        "micro_holds": any(e.micro_oscillation for e in holds),
        "high": any(e.band == SpeedLevel.HIGH for e in bandas),
        "low": any(e.band == SpeedLevel.LOW for e in bandas),
    }


def summarize_corpus(
    segments: Sequence[tuple[EpistemicSegment, Sequence]],
    cfg: Optional[ClassifierConfig] = None,
) -> CorpusSummary:
    """
    Tabla de frecuencias por (lengua, etiqueta) y el agregado ALL por etiqueta

    Args:
        segments: Pares (segmento MANUAL con lengua, eventos del segmento)
        cfg: Umbral de amplitud fuerte

    Raises:
        ArgumentError: Si un segmento no es manual o no tiene lengua
    """
    cfg = cfg or ClassifierConfig()
    recuentos: dict[tuple[str, EpistemicLabel], dict[str, int]] = {}
    for segmento, eventos in segments:
        if segmento.source != SegmentSource.MANUAL or not segmento.language:
            raise ArgumentError(
                f"El segmento {segmento.start_s:.2f}-{segmento.end_s:.2f} s debe ser manual y tener lengua"
            )
        banderas = _flags(events_in(segmento.start_s, segmento.end_s, eventos), cfg)
        for lengua in (segmento.language, ALL_LANGUAGES):
            celda = recuentos.setdefault(
                (lengua, segmento.label), {"total": 0, **{c: 0 for c in SUMMARY_COLUMNS}}
            )
            celda["total"] += 1
            for columna, presente in banderas.items():
                celda[columna] += int(presente)

    etiquetas = list(EpistemicLabel)
    lenguas = sorted({lengua for lengua, _ in recuentos if lengua != ALL_LANGUAGES})
    celdas = []
    for lengua in lenguas + [ALL_LANGUAGES]:
        for label in etiquetas:
            datos = recuentos.get((lengua, label))
            if datos is not None:
                celdas.append(SummaryCell(language=lengua, label=label, **datos))
    return CorpusSummary(cells=tuple(celdas))


def render_summary_text(summary: CorpusSummary) -> str:
    cabecera = f"{'lengua':<8}{'etiqueta':<14}" + "".join(f"{c:>19}" for c in SUMMARY_COLUMNS)
    lineas = [cabecera]
    for celda in summary.cells:
        valores = "".join(f"{celda.fraction(c):>19}" for c in SUMMARY_COLUMNS)
        lineas.append(f"{celda.language:<8}{celda.label.value:<14}{valores}")
    return "\n".join(lineas) + "\n"


def render_segments_text(analyses: Sequence[SegmentAnalysis]) -> str:
    """Predicción de cada segmento con sus evidencias"""
    lineas = []
    for a in analyses:
        p = a.prediction
        manual = a.interval.label.value if a.interval.label else "-"
        lineas.append(
            f"{p.start_s:.2f}-{p.end_s:.2f}s manual={manual} pred={p.label.value} "
            f"cert={p.cert_score} incert={p.incert_score}"
        )
        for evidencia in p.evidence:
            lineas.append(f"    {evidencia.rule}: {event_label(evidencia.event)}")
    return "\n".join(lineas) + "\n"
