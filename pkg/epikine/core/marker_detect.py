"""
Detección de marcadores epistémicos sobre la posición normalizada y la velocidad

Tres familias: tenues (Hold), ráfagas de asentimientos (NodBurst) y bandas
de velocidad (SpeedBand).
"""

import logging
from typing import Optional, Sequence

import numpy as np

from epikine.config.settings import DetectorConfig
from epikine.core.calibration import NOTCH_BOUNDARIES, notch_of
from epikine.errors import SeriesMismatchError
from epikine.schemas import (
    KIND_ORDER,
    SAMPLING_TOLERANCE_S,
    Annotation,
    Hold,
    NodBurst,
    NormalizedSeries,
    Notch,
    SpeedBand,
    SpeedLevel,
    Tier,
    VelocitySeries,
)

logger = logging.getLogger(__name__)

ZERO_VELOCITY = 1e-9

MARK_TIERS = {"HOLD": "MARK_HOLD", "NOD": "MARK_NOD", "SPEED": "MARK_SPEED"}


def check_aligned(norm: NormalizedSeries, vel: VelocitySeries) -> None:
    """
    Raises:
        SeriesMismatchError: Si las dos series no comparten muestras
    """
    if len(norm) != len(vel) or norm.fps != vel.fps:
        raise SeriesMismatchError(
            f"Series desalineadas: {len(norm)} muestras a {norm.fps} fps frente a "
            f"{len(vel)} a {vel.fps} fps"
        )
    if len(norm) and np.max(np.abs(norm.times() - vel.times())) > SAMPLING_TOLERANCE_S:
        raise SeriesMismatchError("Las marcas de tiempo de las series no coinciden")


def _runs(mask: np.ndarray) -> list[tuple[bool, int, int]]:
    """Tramos maximales (valor, primera, última) de una máscara booleana"""
    tramos = []
    inicio = 0
    for i in range(1, len(mask) + 1):
        if i == len(mask) or mask[i] != mask[inicio]:
            tramos.append((bool(mask[inicio]), inicio, i - 1))
            inicio = i
    return tramos


def detect_holds(
    norm: NormalizedSeries, vel: VelocitySeries, cfg: Optional[DetectorConfig] = None
) -> list[Hold]:
    """
    Tenues de posición: |v| < hold_v_max durante al menos hold_min_s

    Un tramo en movimiento entre dos tramos quietos se absorbe como
    micro-oscilación si la amplitud pico a pico de la tenue resultante queda
    bajo micro_osc_max_p2p, sea cual sea su velocidad.

    Raises:
        SeriesMismatchError: Si las series no están alineadas
    """
    cfg = cfg or DetectorConfig()
    check_aligned(norm, vel)
    if len(norm) == 0:
        return []

    p = norm.values()
    v = np.abs(vel.values())
    t = norm.times()
    paso = 1.0 / norm.fps

    tramos = _runs(v < cfg.hold_v_max)

    # Grupos de tramos quietos unidos por micro-oscilaciones: [primera, última, micro]
    grupos: list[list] = []
    k = 0
    while k < len(tramos):
        quieto, i0, i1 = tramos[k]
        if not quieto:
            k += 1
            continue
        grupo = [i0, i1, False]
        while k + 2 < len(tramos):
            _, _, s1 = tramos[k + 2]
            union = p[grupo[0] : s1 + 1]
            if float(np.ptp(union)) >= cfg.micro_osc_max_p2p:
                break
            grupo[1] = s1
            grupo[2] = True
            k += 2
        grupos.append(grupo)
        k += 1

    holds = []
    for i0, i1, micro in grupos:
        duracion = (i1 - i0 + 1) * paso
        if duracion < cfg.hold_min_s - 1e-9:
            continue
        mediana = notch_of(float(np.clip(np.median(p[i0 : i1 + 1]), -1.0, 1.0)))
        inicio = float(t[i0])
        fin = float(t[i1]) + paso
        holds.append(
            Hold(
                start_s=inicio,
                end_s=fin,
                duration_s=fin - inicio,
                median_notch=mediana,
                non_neutral=mediana != Notch.NEUTRAL,
                micro_oscillation=micro,
            )
        )
    logger.info("%d tenues detectadas", len(holds))
    return holds


def _candidate_extrema(p: np.ndarray, v: np.ndarray) -> list[tuple[int, int]]:
    """Extremos en los cambios de signo de la velocidad: (índice, +1 máximo / -1 mínimo)"""
    signos = np.zeros(len(v), dtype=int)
    actual = 0
    for i, valor in enumerate(v):
        if abs(valor) >= ZERO_VELOCITY:
            actual = 1 if valor > 0 else -1
        signos[i] = actual
    # Los ceros iniciales toman el primer signo conocido
    no_nulos = np.flatnonzero(signos)
    if len(no_nulos) == 0:
        return []
    signos[: no_nulos[0]] = signos[no_nulos[0]]

    extremos = []
    for i in range(1, len(signos)):
        if signos[i] != signos[i - 1]:
            tipo = 1 if signos[i - 1] > 0 else -1
            j = i - 1 if (p[i - 1] - p[i]) * tipo >= 0 else i
            extremos.append((j, tipo))
    return extremos


def _zigzag(p: np.ndarray, extremos: list[tuple[int, int]], umbral: float) -> list[tuple[int, int]]:
    """Filtrar extremos: solo se confirman inversiones de al menos `umbral`"""
    salida: list[tuple[int, int]] = []
    for idx, tipo in extremos:
        if not salida:
            salida.append((idx, tipo))
            continue
        ultimo, tipo_ultimo = salida[-1]
        if tipo == tipo_ultimo:
            if (p[idx] - p[ultimo]) * tipo > 0:
                salida[-1] = (idx, tipo)
        elif abs(p[idx] - p[ultimo]) >= umbral:
            salida.append((idx, tipo))
    return salida


def detect_nods(
    norm: NormalizedSeries, vel: VelocitySeries, cfg: Optional[DetectorConfig] = None
) -> list[NodBurst]:
    """
    Ráfagas de asentimientos

    Los trazos entre extremos consecutivos con amplitud >= nod_min_peak_to_peak
    y duración <= nod_max_stroke_s forman cadenas; k trazos cuentan (k + 1) // 2
    ciclos. Cadenas separadas por menos de nod_burst_gap_s se unen.

    Raises:
        SeriesMismatchError: Si las series no están alineadas
    """
    cfg = cfg or DetectorConfig()
    check_aligned(norm, vel)
    if len(norm) < 2:
        return []

    p = norm.values()
    v = vel.values()
    t = norm.times()
    paso = 1.0 / norm.fps
    serie_inicio, serie_fin = norm.span()

    extremos = _zigzag(p, _candidate_extrema(p, v), cfg.nod_min_peak_to_peak)

    # Cadenas de trazos válidos como listas de índices de extremos
    cadenas: list[list[int]] = []
    actual: list[int] = []
    for (a, _), (b, _) in zip(extremos, extremos[1:]):
        valido = (
            abs(p[b] - p[a]) >= cfg.nod_min_peak_to_peak
            and (t[b] - t[a]) <= cfg.nod_max_stroke_s + 1e-9
        )
        if valido:
            if not actual:
                actual = [a]
            actual.append(b)
        elif actual:
            cadenas.append(actual)
            actual = []
    if actual:
        cadenas.append(actual)

    unidas: list[list[int]] = []
    trazos: list[int] = []
    for cadena in cadenas:
        if unidas and t[cadena[0]] - t[unidas[-1][-1]] < cfg.nod_burst_gap_s:
            unidas[-1].extend(cadena)
            trazos[-1] += len(cadena) - 1
        else:
            unidas.append(list(cadena))
            trazos.append(len(cadena) - 1)

    bursts: list[NodBurst] = []
    fin_anterior = serie_inicio
    for cadena, k in zip(unidas, trazos):
        primero, ultimo = cadena[0], cadena[-1]
        duraciones = [t[b] - t[a] for a, b in zip(cadena, cadena[1:]) if b > a]
        margen = float(np.mean(duraciones)) / 2.0 if duraciones else paso
        inicio = max(float(t[primero]) - margen, serie_inicio, fin_anterior)
        fin = min(float(t[ultimo]) + margen, serie_fin)
        if not inicio < fin:
            continue
        tramo = p[primero : ultimo + 1]
        amplitudes = [abs(p[b] - p[a]) for a, b in zip(cadena, cadena[1:])]
        dentro = (t >= inicio - 1e-9) & (t < fin - 1e-9)
        bursts.append(
            NodBurst(
                start_s=inicio,
                end_s=fin,
                cycles=max(1, (k + 1) // 2),
                crosses_neutral=bool(np.any(np.abs(tramo) < NOTCH_BOUNDARIES[0])),
                max_peak_to_peak_p=float(max(amplitudes)),
                peak_speed_deg_s=float(np.max(np.abs(v[dentro]))) if dentro.any() else 0.0,
            )
        )
        fin_anterior = fin
    logger.info("%d ráfagas de asentimientos detectadas", len(bursts))
    return bursts


def speed_profile(
    vel: VelocitySeries, holds: Sequence[Hold], cfg: Optional[DetectorConfig] = None
) -> SpeedBand:
    """
    Banda de velocidad del tramo completo

    Estadístico = percentil speed_percentile de |v| sobre las muestras en
    movimiento fuera de las tenues (0 si no hay ninguna).
    """
    cfg = cfg or DetectorConfig()
    v = np.abs(vel.values())
    t = vel.times()
    mascara = v >= cfg.hold_v_max
    for hold in holds:
        mascara &= ~((t >= hold.start_s - 1e-9) & (t < hold.end_s - 1e-9))

    if mascara.any():
        stat = float(np.quantile(v[mascara], cfg.speed_percentile))
        pico = float(np.max(v[mascara]))
    else:
        stat = 0.0
        pico = 0.0

    if stat > cfg.speed_high:
        band = SpeedLevel.HIGH
    elif stat < cfg.speed_low:
        band = SpeedLevel.LOW
    else:
        band = SpeedLevel.MID

    inicio, fin = vel.span()
    return SpeedBand(start_s=inicio, end_s=fin, band=band, stat_deg_s=stat, peak_deg_s=pico)


def sort_events(events) -> list:
    return sorted(events, key=lambda e: (e.start_s, KIND_ORDER[e.kind]))


def detect_all(
    norm: NormalizedSeries, vel: VelocitySeries, cfg: Optional[DetectorConfig] = None
) -> list:
    """Unión de los tres detectores ordenada por inicio (Hold < NodBurst < SpeedBand)"""
    cfg = cfg or DetectorConfig()
    holds = detect_holds(norm, vel, cfg)
    nods = detect_nods(norm, vel, cfg)
    eventos = list(holds) + list(nods)
    if len(vel):
        eventos.append(speed_profile(vel, holds, cfg))
    return sort_events(eventos)


def event_label(event) -> str:
    """Forma corta de un evento para los niveles ELAN"""
    if isinstance(event, NodBurst):
        neutral = "+" if event.crosses_neutral else "-"
        return f"NOD x{event.cycles} neutral{neutral} {event.peak_speed_deg_s:.1f}deg/s"
    if isinstance(event, Hold):
        micro = "+" if event.micro_oscillation else "-"
        return f"HOLD {event.duration_s:.2f}s {event.median_notch.name} micro{micro}"
    return f"SPEED {event.band.value} {event.stat_deg_s:.1f}deg/s"


def events_to_tiers(events) -> list[Tier]:
    """Un nivel por familia (MARK_HOLD, MARK_NOD, MARK_SPEED), en milisegundos"""
    por_nivel: dict[str, list[Annotation]] = {nombre: [] for nombre in MARK_TIERS.values()}
    for event in sort_events(events):
        inicio = int(round(event.start_s * 1000))
        fin = int(round(event.end_s * 1000))
        if fin <= inicio:
            continue
        por_nivel[MARK_TIERS[event.kind]].append(
            Annotation(start_ms=inicio, end_ms=fin, value=event_label(event))
        )
    return [Tier(tier_id=nombre, annotations=tuple(a)) for nombre, a in por_nivel.items()]
