"""
Codificación ASCII reversible de transcripciones Typannot

Forma canónica: SEG:DOF[:SIDE]=NOTCH[;v±][;a±][;xN]@inicio-fin
La gramática completa está en docs/typannot_grammar.md.
"""

import logging
from typing import Iterable, Optional, Sequence

from pydantic import ValidationError

from epikine.errors import CodecError, RecordParseError
from epikine.schemas import (
    Contrast,
    Dof,
    DofId,
    Hold,
    NodBurst,
    NormalizedSeries,
    Notch,
    ProsodicQualifier,
    SegmentId,
    Side,
    SpeedBand,
    SpeedLevel,
    TypannotRecord,
)

logger = logging.getLogger(__name__)

# Polos de cada DDL: (positivo, negativo)
DOF_POLES = {
    Dof.FLXEXT: ("FLX", "EXT"),
    Dof.ABDADD: ("ABD", "ADD"),
    Dof.RINREX: ("RIN", "REX"),
}
GRADE_NAMES = {1: "PETIT", 2: "MOYEN", 3: "GRAND", 4: "BUTEE"}

SIDED_SEGMENTS = {SegmentId.COU, SegmentId.BUSTE, SegmentId.EPAULES}

_CONTRAST_SIGN = {Contrast.PLUS: "+", Contrast.MINUS: "-"}
_SIGN_CONTRAST = {"+": Contrast.PLUS, "-": Contrast.MINUS}


def side_allowed(segment: SegmentId, dof: DofId) -> bool:
    """Lateralidad legal: nunca en FLXEXT ni en TETE"""
    if dof.side == Side.NONE:
        return True
    return dof.dof != Dof.FLXEXT and segment in SIDED_SEGMENTS


def notch_token(notch: Notch, dof: Dof) -> str:
    if notch == Notch.NEUTRAL:
        return "NEUTRAL"
    positivo, negativo = DOF_POLES[dof]
    polo = positivo if notch > 0 else negativo
    return f"{polo}_{GRADE_NAMES[notch.grade]}"


def parse_notch_token(token: str, dof: Dof) -> Optional[Notch]:
    if token == "NEUTRAL":
        return Notch.NEUTRAL
    positivo, negativo = DOF_POLES[dof]
    for grado, nombre in GRADE_NAMES.items():
        if token == f"{positivo}_{nombre}":
            return Notch(grado)
        if token == f"{negativo}_{nombre}":
            return Notch(-grado)
    return None


def encode(record: TypannotRecord) -> str:
    """
    Forma canónica de un registro

    Raises:
        CodecError: Si la combinación segmento/DDL/lado no es legal
    """
    if not side_allowed(record.segment, record.dof):
        raise CodecError(
            f"Lado {record.dof.side.value} no permitido en {record.segment.value}:{record.dof.dof.value}"
        )
    partes = [f"{record.segment.value}:{record.dof}={notch_token(record.notch, record.dof.dof)}"]
    q = record.qualifiers
    if q.speed_contrast != Contrast.NONE:
        partes.append(f"v{_CONTRAST_SIGN[q.speed_contrast]}")
    if q.amplitude_contrast != Contrast.NONE:
        partes.append(f"a{_CONTRAST_SIGN[q.amplitude_contrast]}")
    if q.repetitions is not None:
        partes.append(f"x{q.repetitions}")
    return ";".join(partes) + f"@{record.start_s:.2f}-{record.end_s:.2f}"


class _Cursor:
    """Lector con posición (columna 1-based) para los mensajes de error"""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    @property
    def column(self) -> int:
        return self.pos + 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def fail(self, message: str, pos: Optional[int] = None):
        raise RecordParseError(message, (self.pos if pos is None else pos) + 1)

    def expect(self, char: str) -> None:
        if self.peek() != char:
            encontrado = repr(self.peek()) if self.peek() else "fin de texto"
            self.fail(f"Se esperaba '{char}' y se encontró {encontrado}")
        self.pos += 1

    def word(self, allowed: str) -> tuple[str, int]:
        inicio = self.pos
        while self.peek() and self.peek() in allowed:
            self.pos += 1
        if self.pos == inicio:
            self.fail("Se esperaba un identificador")
        return self.text[inicio : self.pos], inicio

    def number(self) -> tuple[str, int]:
        return self.word("0123456789")

    def time(self) -> float:
        entero, inicio = self.number()
        if len(entero) > 1 and entero[0] == "0":
            self.fail("Ceros a la izquierda no canónicos", inicio)
        self.expect(".")
        decimales, pos = self.number()
        if len(decimales) != 2:
            self.fail("El tiempo debe tener exactamente dos decimales", pos)
        return float(f"{entero}.{decimales}")


_UPPER = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


def decode(text: str) -> TypannotRecord:
    """
    Leer un registro en forma canónica

    Raises:
        RecordParseError: Si el texto no respeta la gramática (con columna)
    """
    c = _Cursor(text)

    token, pos = c.word(_UPPER)
    try:
        segment = SegmentId(token)
    except ValueError:
        c.fail(f"Segmento desconocido '{token}'", pos)
    c.expect(":")

    token, pos = c.word(_UPPER)
    try:
        dof = Dof(token)
    except ValueError:
        c.fail(f"DDL desconocido '{token}'", pos)

    side = Side.NONE
    side_pos = pos
    if c.peek() == ":":
        c.pos += 1
        token, side_pos = c.word(_UPPER)
        if token not in (Side.LEFT.value, Side.RIGHT.value):
            c.fail(f"Lado desconocido '{token}'", side_pos)
        side = Side(token)
    dof_id = DofId(dof=dof, side=side)
    if not side_allowed(segment, dof_id):
        c.fail(f"Lado {side.value} no permitido en {segment.value}:{dof.value}", side_pos)
    c.expect("=")

    token, pos = c.word(_UPPER + "_")
    notch = parse_notch_token(token, dof)
    if notch is None:
        c.fail(f"Cran '{token}' inválido para {dof.value}", pos)

    cualificadores: dict = {}
    orden = "vax"
    ultimo = -1
    while c.peek() == ";":
        c.pos += 1
        pos = c.pos
        letra = c.peek()
        if letra not in orden:
            c.fail(f"Cualificador desconocido '{letra}'")
        if orden.index(letra) <= ultimo:
            c.fail(f"Cualificador '{letra}' repetido o fuera del orden v, a, x")
        ultimo = orden.index(letra)
        c.pos += 1
        if letra == "x":
            digitos, dpos = c.number()
            if digitos[0] == "0":
                c.fail("El número de repeticiones debe ser positivo y sin ceros a la izquierda", dpos)
            cualificadores["repetitions"] = int(digitos)
        else:
            signo = c.peek()
            if signo not in _SIGN_CONTRAST:
                c.fail(f"Se esperaba '+' o '-' tras '{letra}'")
            c.pos += 1
            campo = "speed_contrast" if letra == "v" else "amplitude_contrast"
            cualificadores[campo] = _SIGN_CONTRAST[signo]

    c.expect("@")
    inicio_pos = c.pos
    start_s = c.time()
    c.expect("-")
    end_s = c.time()
    if c.peek():
        c.fail("Texto sobrante al final del registro")
    if not start_s < end_s:
        c.fail(f"Intervalo invertido o vacío ({start_s:.2f} >= {end_s:.2f})", inicio_pos)

    return TypannotRecord(
        segment=segment,
        dof=dof_id,
        notch=notch,
        qualifiers=ProsodicQualifier(**cualificadores),
        start_s=start_s,
        end_s=end_s,
    )


def write_records(records: Iterable[TypannotRecord]) -> str:
    return "".join(encode(r) + "\n" for r in records)


def read_records(text: str) -> list[TypannotRecord]:
    """Leer un archivo de registros (uno por línea; se ignoran líneas vacías)"""
    registros = []
    for numero, linea in enumerate(text.split("\n"), start=1):
        if not linea.strip():
            continue
        try:
            registros.append(decode(linea.rstrip("\r")))
        except RecordParseError as e:
            raise RecordParseError(f"Línea {numero}: {e.detail}", e.column) from e
    return registros


def series_to_records(
    norm: NormalizedSeries, min_run_s: float = 0.2
) -> list[TypannotRecord]:
    """
    Convertir una serie normalizada en registros por tramos de cran constante

    Los tramos más cortos que min_run_s se funden con el vecino de cran más
    cercano (empate: el anterior), empezando por el más corto.

    Raises:
        CodecError: Si min_run_s es negativo
    """
    if min_run_s < 0:
        raise CodecError(f"min_run_s debe ser >= 0 (recibido {min_run_s})")
    if len(norm) == 0:
        return []

    paso = 1.0 / norm.fps
    # Tramos como [cran, primera muestra, última muestra]
    tramos: list[list] = []
    for i, notch in enumerate(norm.notches()):
        if tramos and tramos[-1][0] == notch:
            tramos[-1][2] = i
        else:
            tramos.append([notch, i, i])

    tiempos = norm.times()

    def limites(tramo) -> tuple[float, float]:
        return float(tiempos[tramo[1]]), float(tiempos[tramo[2]]) + paso

    def es_corto(tramo) -> bool:
        inicio, fin = limites(tramo)
        return (fin - inicio) < min_run_s - 1e-9 or round(inicio, 2) >= round(fin, 2)

    while len(tramos) > 1:
        cortos = [i for i, t in enumerate(tramos) if es_corto(t)]
        if not cortos:
            break
        k = min(cortos, key=lambda i: (tramos[i][2] - tramos[i][1], i))
        notch = tramos[k][0]
        vecinos = [j for j in (k - 1, k + 1) if 0 <= j < len(tramos)]
        destino = min(vecinos, key=lambda j: (abs(int(tramos[j][0]) - int(notch)), j))
        if destino < k:
            tramos[destino][2] = tramos[k][2]
        else:
            tramos[destino][1] = tramos[k][1]
        del tramos[k]
        # Reagrupar vecinos que ahora comparten cran
        fusionados: list[list] = []
        for t in tramos:
            if fusionados and fusionados[-1][0] == t[0]:
                fusionados[-1][2] = t[2]
            else:
                fusionados.append(t)
        tramos = fusionados

    registros = []
    for notch, i0, i1 in tramos:
        inicio, fin = limites([notch, i0, i1])
        # Un tramo único más corto que una centésima se ensancha a 0.01 s
        if round(fin, 2) <= round(inicio, 2):
            fin = round(inicio, 2) + 0.01
        registros.append(
            TypannotRecord(
                segment=norm.segment, dof=norm.dof, notch=notch, start_s=inicio, end_s=fin
            )
        )
    logger.debug("%d registros a partir de %d muestras", len(registros), len(norm))
    return registros


def qualify_records(
    records: Sequence[TypannotRecord],
    events: Sequence,
    strong_amplitude_p: float = 0.625,
    micro_osc_max_p2p: float = 0.125,
) -> list[TypannotRecord]:
    """
    Añadir cualificadores prosódicos a partir de los marcadores detectados

    Un registro toma los atributos del NodBurst y de la SpeedBand que contienen
    el punto medio de su intervalo.
    """
    salida = []
    for record in records:
        medio = (record.start_s + record.end_s) / 2.0
        datos = record.qualifiers.model_dump()
        for event in events:
            if isinstance(event, Hold) or not event.start_s <= medio < event.end_s:
                continue
            if isinstance(event, NodBurst):
                datos["repetitions"] = event.cycles
                if event.max_peak_to_peak_p >= strong_amplitude_p:
                    datos["amplitude_contrast"] = Contrast.PLUS
                elif event.max_peak_to_peak_p < micro_osc_max_p2p:
                    datos["amplitude_contrast"] = Contrast.MINUS
            elif isinstance(event, SpeedBand):
                if event.band == SpeedLevel.HIGH:
                    datos["speed_contrast"] = Contrast.PLUS
                elif event.band == SpeedLevel.LOW:
                    datos["speed_contrast"] = Contrast.MINUS
        try:
            salida.append(
                record.model_copy(update={"qualifiers": ProsodicQualifier.model_validate(datos)})
            )
        except ValidationError as e:
            raise CodecError(f"Cualificadores inválidos: {e}") from e
    return salida
