"""
Lectura y escritura de archivos ELAN (EAF) y acuerdo entre anotadores
"""

import logging
import math
from typing import Iterable, Optional, Sequence

import numpy as np
from lxml import etree
from pydantic import BaseModel, ConfigDict
from sklearn.metrics import cohen_kappa_score, confusion_matrix

from epikine.core.epistemic_classify import SegmentInterval
from epikine.errors import (
    EafParseError,
    EafReferenceError,
    InputError,
    TierValidityError,
    UndefinedAgreementError,
)
from epikine.schemas import AgreementReport, Annotation, EpistemicLabel, Landmark, Tier

logger = logging.getLogger(__name__)

DEFAULT_DATE = "1970-01-01T00:00:00+00:00"
LINGUISTIC_TYPE = "default-lt"
BACKGROUND_LABEL = "NONE"
_XSI = "http://www.w3.org/2001/XMLSchema-instance"


class EafDocument(BaseModel):
    """Documento EAF: cabecera mínima y niveles alineados"""

    model_config = ConfigDict(frozen=True)

    author: str = ""
    date: str = DEFAULT_DATE
    media_url: Optional[str] = None
    mime_type: Optional[str] = None
    tiers: tuple[Tier, ...] = ()
    # Anotaciones de duración nula descartadas al leer
    dropped_annotations: int = 0


def read_eaf(data: bytes) -> EafDocument:
    """
    Leer un documento EAF

    Las anotaciones alineables se resuelven a milisegundos absolutos a través
    de TIME_SLOT; los elementos desconocidos se ignoran. Las anotaciones de
    duración nula se descartan y se cuentan en dropped_annotations.

    Raises:
        EafParseError: Si el XML está mal formado, no es un documento EAF o una
            anotación termina antes de empezar
        EafReferenceError: Si una anotación apunta a un TIME_SLOT inexistente
    """
    try:
        root = etree.fromstring(data)
    except etree.XMLSyntaxError as e:
        raise EafParseError(f"XML mal formado: {e}") from e
    if root.tag != "ANNOTATION_DOCUMENT":
        raise EafParseError(f"Se esperaba ANNOTATION_DOCUMENT y se encontró {root.tag}")

    slots: dict[str, Optional[int]] = {}
    for slot in root.iterfind("TIME_ORDER/TIME_SLOT"):
        valor = slot.get("TIME_VALUE")
        try:
            slots[slot.get("TIME_SLOT_ID")] = None if valor is None else int(valor)
        except ValueError as e:
            raise EafParseError(f"TIME_VALUE no entero: {valor!r}") from e

    def resolver(ref: Optional[str]) -> int:
        if ref not in slots:
            raise EafReferenceError(f"Referencia a un TIME_SLOT inexistente: {ref}", ref)
        if slots[ref] is None:
            raise EafReferenceError(f"El TIME_SLOT {ref} no tiene TIME_VALUE", ref)
        return slots[ref]

    tiers = []
    descartadas = 0
    for tier in root.iterfind("TIER"):
        anotaciones = []
        for alineable in tier.iterfind("ANNOTATION/ALIGNABLE_ANNOTATION"):
            inicio = resolver(alineable.get("TIME_SLOT_REF1"))
            fin = resolver(alineable.get("TIME_SLOT_REF2"))
            valor = alineable.findtext("ANNOTATION_VALUE") or ""
            if fin < inicio:
                raise EafParseError(
                    f"Anotación {alineable.get('ANNOTATION_ID')} invertida en "
                    f"{tier.get('TIER_ID')}: {inicio}-{fin} ms"
                )
            if fin == inicio:
                logger.warning(
                    "Anotación %s de duración nula en %s: se descarta",
                    alineable.get("ANNOTATION_ID"),
                    tier.get("TIER_ID"),
                )
                descartadas += 1
                continue
            anotaciones.append(Annotation(start_ms=inicio, end_ms=fin, value=valor))
        anotaciones.sort(key=lambda a: (a.start_ms, a.end_ms))
        tiers.append(Tier(tier_id=tier.get("TIER_ID", ""), annotations=tuple(anotaciones)))

    media = root.find("HEADER/MEDIA_DESCRIPTOR")
    return EafDocument(
        author=root.get("AUTHOR", ""),
        date=root.get("DATE", DEFAULT_DATE),
        media_url=None if media is None else media.get("MEDIA_URL"),
        mime_type=None if media is None else media.get("MIME_TYPE"),
        tiers=tuple(tiers),
        dropped_annotations=descartadas,
    )


def validate_tier(tier: Tier) -> None:
    """
    Raises:
        TierValidityError: Si dos anotaciones del nivel se solapan
    """
    ordenadas = sorted(tier.annotations, key=lambda a: (a.start_ms, a.end_ms))
    for a, b in zip(ordenadas, ordenadas[1:]):
        if b.start_ms < a.end_ms:
            raise TierValidityError(
                f"Anotaciones solapadas en {tier.tier_id}: {a.start_ms}-{a.end_ms} y "
                f"{b.start_ms}-{b.end_ms} ms"
            )


def write_eaf(
    tiers: Sequence[Tier],
    media_url: Optional[str] = None,
    mime_type: Optional[str] = None,
    author: str = "",
    date: str = DEFAULT_DATE,
) -> bytes:
    """
    Escribir un documento EAF determinista

    Niveles ordenados por TIER_ID; un TIME_SLOT por instante distinto, en orden
    temporal.

    Raises:
        TierValidityError: Si un nivel tiene anotaciones solapadas o ids repetidos
    """
    ids = [t.tier_id for t in tiers]
    if len(set(ids)) != len(ids):
        raise TierValidityError("Hay niveles con el mismo TIER_ID")
    for tier in tiers:
        validate_tier(tier)

    instantes = sorted({ms for t in tiers for a in t.annotations for ms in (a.start_ms, a.end_ms)})
    slot_de = {ms: f"ts{n}" for n, ms in enumerate(instantes, start=1)}

    root = etree.Element(
        "ANNOTATION_DOCUMENT",
        {
            "AUTHOR": author,
            "DATE": date,
            "FORMAT": "3.0",
            "VERSION": "3.0",
            f"{{{_XSI}}}noNamespaceSchemaLocation": "http://www.mpi.nl/tools/elan/EAFv3.0.xsd",
        },
        nsmap={"xsi": _XSI},
    )
    header = etree.SubElement(root, "HEADER", {"MEDIA_FILE": "", "TIME_UNITS": "milliseconds"})
    if media_url is not None:
        media = {"MEDIA_URL": media_url}
        if mime_type is not None:
            media["MIME_TYPE"] = mime_type
        etree.SubElement(header, "MEDIA_DESCRIPTOR", media)

    orden = etree.SubElement(root, "TIME_ORDER")
    for ms in instantes:
        etree.SubElement(orden, "TIME_SLOT", {"TIME_SLOT_ID": slot_de[ms], "TIME_VALUE": str(ms)})

    contador = 0
    for tier in sorted(tiers, key=lambda t: t.tier_id):
        nodo = etree.SubElement(
            root, "TIER", {"LINGUISTIC_TYPE_REF": LINGUISTIC_TYPE, "TIER_ID": tier.tier_id}
        )
        for a in sorted(tier.annotations, key=lambda a: (a.start_ms, a.end_ms)):
            contador += 1
            envoltorio = etree.SubElement(nodo, "ANNOTATION")
            alineable = etree.SubElement(
                envoltorio,
                "ALIGNABLE_ANNOTATION",
                {
                    "ANNOTATION_ID": f"a{contador}",
                    "TIME_SLOT_REF1": slot_de[a.start_ms],
                    "TIME_SLOT_REF2": slot_de[a.end_ms],
                },
            )
            etree.SubElement(alineable, "ANNOTATION_VALUE").text = a.value

    etree.SubElement(
        root,
        "LINGUISTIC_TYPE",
        {"GRAPHIC_REFERENCES": "false", "LINGUISTIC_TYPE_ID": LINGUISTIC_TYPE, "TIME_ALIGNABLE": "true"},
    )
    return etree.tostring(root, xml_declaration=True, encoding="UTF-8", pretty_print=True)


def write_document(document: EafDocument) -> bytes:
    return write_eaf(
        document.tiers,
        media_url=document.media_url,
        mime_type=document.mime_type,
        author=document.author,
        date=document.date,
    )


def tier_by_id(document: EafDocument, tier_id: str) -> Optional[Tier]:
    for tier in document.tiers:
        if tier.tier_id == tier_id:
            return tier
    return None


def landmarks_from_tier(tier: Tier) -> dict[Landmark, float]:
    """Instante (s) de cada hito de calibración: punto medio de su anotación"""
    hitos: dict[Landmark, float] = {}
    for a in tier.annotations:
        try:
            hito = Landmark(a.value.strip())
        except ValueError:
            logger.warning("Etiqueta de calibración desconocida en %s: %r", tier.tier_id, a.value)
            continue
        if hito in hitos:
            logger.warning("Hito %s repetido en %s; se usa el primero", hito.value, tier.tier_id)
            continue
        hitos[hito] = (a.start_ms + a.end_ms) / 2000.0
    return hitos


def segments_from_tier(tier: Tier, language: Optional[str] = None) -> list[SegmentInterval]:
    """
    Segmentos epistémicos manuales de un nivel

    Raises:
        InputError: Si una etiqueta no es CERT ni INCERT
    """
    segmentos = []
    for a in tier.annotations:
        valor = a.value.strip()
        if valor not in (EpistemicLabel.CERT.value, EpistemicLabel.INCERT.value):
            raise InputError(
                f"Etiqueta epistémica inválida en {tier.tier_id} ({a.start_ms}-{a.end_ms} ms): {valor!r}"
            )
        segmentos.append(
            SegmentInterval(
                start_s=a.start_ms / 1000.0,
                end_s=a.end_ms / 1000.0,
                label=EpistemicLabel(valor),
                language=language,
            )
        )
    return segmentos


def rasterize(tier: Tier, frame_rate: float, frame_count: int) -> list[str]:
    """Etiqueta de cada fotograma (la anotación que contiene su centro, o NONE)"""
    etiquetas = [BACKGROUND_LABEL] * frame_count
    for a in tier.annotations:
        primero = max(0, math.ceil(a.start_ms / 1000.0 * frame_rate - 0.5))
        ultimo = min(frame_count, math.ceil(a.end_ms / 1000.0 * frame_rate - 0.5))
        for k in range(primero, ultimo):
            etiquetas[k] = a.value
    return etiquetas


def _covered_ms(tier: Tier) -> int:
    return sum(a.end_ms - a.start_ms for a in tier.annotations)


def _intersection_ms(a: Tier, b: Tier) -> int:
    total = 0
    for x in a.annotations:
        for y in b.annotations:
            total += max(0, min(x.end_ms, y.end_ms) - max(x.start_ms, y.start_ms))
    return total


def agreement(
    a: Tier,
    b: Tier,
    frame_rate: float,
    vocabulary: Optional[Iterable[str]] = None,
) -> AgreementReport:
    """
    Acuerdo entre dos niveles: kappa de Cohen por fotograma y solapamiento temporal

    Args:
        a, b: Niveles a comparar
        frame_rate: Fotogramas por segundo de la rasterización
        vocabulary: Si se indica, etiquetas permitidas

    Returns:
        AgreementReport

    Raises:
        UndefinedAgreementError: Si ninguno de los niveles tiene anotaciones
        InputError: Si hay etiquetas fuera del vocabulario
    """
    if frame_rate <= 0:
        raise InputError(f"frame_rate debe ser positivo (recibido {frame_rate})")
    for tier in (a, b):
        validate_tier(tier)
        if vocabulary is not None:
            permitidas = set(vocabulary)
            fuera = {x.value for x in tier.annotations} - permitidas
            if fuera:
                raise InputError(f"Etiquetas fuera del vocabulario en {tier.tier_id}: {sorted(fuera)}")

    fin_ms = max([x.end_ms for x in a.annotations + b.annotations], default=0)
    if fin_ms == 0:
        raise UndefinedAgreementError("Los dos niveles están vacíos: kappa indefinido")

    n = math.ceil(fin_ms / 1000.0 * frame_rate)
    ra = rasterize(a, frame_rate, n)
    rb = rasterize(b, frame_rate, n)

    etiquetas = sorted(set(ra) | set(rb))
    matriz = confusion_matrix(ra, rb, labels=etiquetas)
    p_o = float(np.trace(matriz)) / n
    p_e = float(np.sum(matriz.sum(axis=1) * matriz.sum(axis=0))) / (n * n)
    if len(etiquetas) == 1:
        kappa = 1.0
    else:
        kappa = float(cohen_kappa_score(ra, rb, labels=etiquetas))
        if math.isnan(kappa):
            kappa = 1.0 if p_o == 1.0 else 0.0

    interseccion = _intersection_ms(a, b)
    union = _covered_ms(a) + _covered_ms(b) - interseccion
    solapamiento = interseccion / union if union > 0 else 0.0

    confusion = {
        fila: {col: int(matriz[i, j]) for j, col in enumerate(etiquetas)}
        for i, fila in enumerate(etiquetas)
    }
    logger.info("Acuerdo sobre %d fotogramas: kappa %.3f", n, kappa)
    return AgreementReport(
        frame_kappa=max(-1.0, min(1.0, kappa)),
        overlap_ratio=solapamiento,
        observed_agreement=p_o,
        chance_agreement=p_e,
        frame_count=n,
        confusion=confusion,
    )


def render_agreement(report: AgreementReport) -> str:
    lineas = [
        f"kappa por fotograma: {report.frame_kappa:.4f}",
        f"acuerdo observado (p_o): {report.observed_agreement:.4f}",
        f"acuerdo por azar (p_e): {report.chance_agreement:.4f}",
        f"solapamiento temporal: {report.overlap_ratio:.4f}",
        f"fotogramas: {report.frame_count}",
        "confusión (filas: A, columnas: B):",
    ]
    etiquetas = list(report.confusion)
    lineas.append(" " * 12 + "".join(f"{e:>10}" for e in etiquetas))
    for fila in etiquetas:
        lineas.append(f"{fila:<12}" + "".join(f"{report.confusion[fila][c]:>10}" for c in etiquetas))
    return "\n".join(lineas) + "\n"
