"""
Oráculo sintético

Genera trayectorias normalizadas por tramos (tenues, asentimientos, rampas)
con los eventos plantados conocidos de antemano, y puntúa los detectores
contra ellos.
"""

import logging
import math
from typing import Annotated, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from epikine.config.settings import DetectorConfig
from epikine.core.calibration import NOTCH_BOUNDARIES, denormalize, normalize_series, notch_of
from epikine.core.kinematics import smooth, velocity
from epikine.core.marker_detect import detect_all, sort_events
from epikine.errors import SpecError
from epikine.schemas import (
    AngleSample,
    AngleSeries,
    CalibrationProfile,
    Hold,
    MarkerEvent,
    NodBurst,
    NormalizedSeries,
    Notch,
    SpeedBand,
    SpeedLevel,
    VelocitySample,
    VelocitySeries,
)

logger = logging.getLogger(__name__)

DEFAULT_WOBBLE_HZ = 2.5
NOISE_SMOOTH_WINDOW = 5
TILING_TOLERANCE_S = 1e-6


class HoldPiece(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["HOLD"] = "HOLD"
    p: float
    duration_s: float = Field(gt=0)
    wobble_p2p: float = Field(default=0.0, ge=0)
    wobble_hz: float = Field(default=DEFAULT_WOBBLE_HZ, gt=0)


class NodPiece(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["NOD"] = "NOD"
    center_p: float
    half_amp_p: float = Field(gt=0)
    cycles: int = Field(ge=1)
    cycle_s: float = Field(gt=0)

    @property
    def duration_s(self) -> float:
        return self.cycles * self.cycle_s


class RampPiece(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["RAMP"] = "RAMP"
    p_from: float
    p_to: float
    duration_s: float = Field(gt=0)


Piece = Annotated[Union[HoldPiece, NodPiece, RampPiece], Field(discriminator="kind")]


class TrajectorySpec(BaseModel):
    """Trayectoria sintética: tramos consecutivos que cubren duration_s"""

    model_config = ConfigDict(frozen=True)

    fps: float = Field(default=25.0, gt=0)
    duration_s: float = Field(gt=0)
    pieces: tuple[Piece, ...]
    noise_sigma_p: float = Field(default=0.0, ge=0)
    seed: int = 0


class GroundTruth(BaseModel):
    model_config = ConfigDict(frozen=True)

    events: tuple[MarkerEvent, ...] = ()


class KindScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: str
    matched: int
    detected: int
    planted: int

    @property
    def precision(self) -> float:
        return 1.0 if self.detected == 0 else self.matched / self.detected

    @property
    def recall(self) -> float:
        return 1.0 if self.planted == 0 else self.matched / self.planted

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)


class Evaluation(BaseModel):
    model_config = ConfigDict(frozen=True)

    scores: dict[str, KindScore]


class SuiteRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    evaluation: Evaluation


class SuiteReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    rows: tuple[SuiteRow, ...]
    totals: Evaluation


def load_spec(text: Union[str, bytes]) -> TrajectorySpec:
    """
    Raises:
        SpecError: Si el JSON no describe una trayectoria válida
    """
    try:
        spec = TrajectorySpec.model_validate_json(text)
    except ValidationError as e:
        raise SpecError(f"Especificación de trayectoria inválida: {e}") from e
    validate_spec(spec)
    return spec


def validate_spec(spec: TrajectorySpec) -> None:
    """
    Raises:
        SpecError: Si los tramos no cubren la duración o salen de [-1, 1]
    """
    if not spec.pieces:
        raise SpecError("La trayectoria no tiene tramos")
    total = sum(piece.duration_s for piece in spec.pieces)
    if abs(total - spec.duration_s) > TILING_TOLERANCE_S:
        raise SpecError(
            f"Los tramos suman {total:.6f} s y la duración declarada es {spec.duration_s:.6f} s"
        )
    for n, piece in enumerate(spec.pieces):
        if isinstance(piece, HoldPiece):
            bajo, alto = piece.p - piece.wobble_p2p / 2, piece.p + piece.wobble_p2p / 2
        elif isinstance(piece, NodPiece):
            bajo, alto = piece.center_p - piece.half_amp_p, piece.center_p + piece.half_amp_p
        else:
            bajo, alto = sorted((piece.p_from, piece.p_to))
        if bajo < -1.0 or alto > 1.0:
            raise SpecError(f"El tramo {n} ({piece.kind}) sale del intervalo [-1, 1]")


def _wobble_hz(piece: HoldPiece) -> float:
    # Número entero de ciclos en el tramo
    ciclos = max(1, round(piece.wobble_hz * piece.duration_s))
    return ciclos / piece.duration_s


def _piece_value(piece, tau: float) -> tuple[float, float]:
    """(p, dp/dt) de un tramo en el instante local tau"""
    if isinstance(piece, HoldPiece):
        if piece.wobble_p2p == 0:
            return piece.p, 0.0
        w = 2 * math.pi * _wobble_hz(piece)
        mitad = piece.wobble_p2p / 2
        return piece.p - mitad * math.cos(w * tau), mitad * w * math.sin(w * tau)
    if isinstance(piece, NodPiece):
        w = 2 * math.pi / piece.cycle_s
        return (
            piece.center_p + piece.half_amp_p * math.sin(w * tau),
            piece.half_amp_p * w * math.cos(w * tau),
        )
    pendiente = (piece.p_to - piece.p_from) / piece.duration_s
    return piece.p_from + pendiente * tau, pendiente


def _dtheta_dp(p: float, dp: float, profile: CalibrationProfile) -> float:
    lado_flexion = p > 0 or (p == 0 and dp > 0)
    if lado_flexion:
        return profile.flx_limit_deg - profile.rest_deg
    return profile.rest_deg - profile.ext_limit_deg


def _boundaries(spec: TrajectorySpec) -> list[float]:
    limites = [0.0]
    for piece in spec.pieces:
        limites.append(limites[-1] + piece.duration_s)
    return limites


def sample_count(spec: TrajectorySpec) -> int:
    return int(math.ceil(spec.duration_s * spec.fps - 1e-9))


def analytic_signal(spec: TrajectorySpec, profile: CalibrationProfile) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tiempos, p analítico y velocidad analítica en grados/segundo"""
    limites = _boundaries(spec)
    n = sample_count(spec)
    tiempos = np.arange(n) / spec.fps
    p = np.empty(n)
    v = np.empty(n)
    k = 0
    for i, t in enumerate(tiempos):
        while k + 1 < len(spec.pieces) and t + 1e-9 >= limites[k + 1]:
            k += 1
        valor, derivada = _piece_value(spec.pieces[k], t - limites[k])
        p[i] = valor
        v[i] = _dtheta_dp(valor, derivada, profile) * derivada
    return tiempos, p, v


def _brute_quantile(valores: list[float], q: float) -> float:
    """Cuantil con interpolación lineal entre estadísticos de orden"""
    ordenados = sorted(valores)
    posicion = q * (len(ordenados) - 1)
    bajo = int(math.floor(posicion))
    alto = min(bajo + 1, len(ordenados) - 1)
    return ordenados[bajo] + (ordenados[alto] - ordenados[bajo]) * (posicion - bajo)


def ground_truth(
    spec: TrajectorySpec, profile: CalibrationProfile, cfg: Optional[DetectorConfig] = None
) -> GroundTruth:
    """Eventos plantados por construcción"""
    cfg = cfg or DetectorConfig()
    limites = _boundaries(spec)
    tiempos, _, v = analytic_signal(spec, profile)
    eventos: list = []

    nods: list[dict] = []
    for k, piece in enumerate(spec.pieces):
        inicio, fin = limites[k], limites[k + 1]
        if isinstance(piece, HoldPiece) and piece.duration_s >= cfg.hold_min_s:
            notch = notch_of(piece.p)
            eventos.append(
                Hold(
                    start_s=inicio,
                    end_s=fin,
                    duration_s=fin - inicio,
                    median_notch=notch,
                    non_neutral=notch != Notch.NEUTRAL,
                    micro_oscillation=piece.wobble_p2p > 0,
                )
            )
        elif isinstance(piece, NodPiece):
            bajo = piece.center_p - piece.half_amp_p
            alto = piece.center_p + piece.half_amp_p
            dentro = (tiempos >= inicio - 1e-9) & (tiempos < fin - 1e-9)
            pico = float(np.max(np.abs(v[dentro]))) if dentro.any() else 0.0
            actual = {
                "start_s": inicio,
                "end_s": fin,
                "cycles": piece.cycles,
                "crosses_neutral": bajo < NOTCH_BOUNDARIES[0] and alto > -NOTCH_BOUNDARIES[0],
                "max_peak_to_peak_p": 2 * piece.half_amp_p,
                "peak_speed_deg_s": pico,
            }
            if nods and inicio - nods[-1]["end_s"] < cfg.nod_burst_gap_s:
                previo = nods[-1]
                previo["end_s"] = fin
                previo["cycles"] += piece.cycles
                previo["crosses_neutral"] |= actual["crosses_neutral"]
                previo["max_peak_to_peak_p"] = max(previo["max_peak_to_peak_p"], actual["max_peak_to_peak_p"])
                previo["peak_speed_deg_s"] = max(previo["peak_speed_deg_s"], pico)
            else:
                nods.append(actual)
    eventos.extend(NodBurst(**datos) for datos in nods)

    holds = [e for e in eventos if isinstance(e, Hold)]
    movimiento = []
    for t, valor in zip(tiempos, v):
        if abs(valor) < cfg.hold_v_max:
            continue
        if any(h.start_s <= t < h.end_s for h in holds):
            continue
        movimiento.append(abs(float(valor)))
    stat = _brute_quantile(movimiento, cfg.speed_percentile) if movimiento else 0.0
    if stat > cfg.speed_high:
        band = SpeedLevel.HIGH
    elif stat < cfg.speed_low:
        band = SpeedLevel.LOW
    else:
        band = SpeedLevel.MID
    eventos.append(
        SpeedBand(
            start_s=0.0,
            end_s=len(tiempos) / spec.fps,
            band=band,
            stat_deg_s=stat,
            peak_deg_s=max(movimiento) if movimiento else 0.0,
        )
    )
    return GroundTruth(events=tuple(sort_events(eventos)))


def generate(
    spec: TrajectorySpec,
    profile: CalibrationProfile,
    cfg: Optional[DetectorConfig] = None,
) -> tuple[AngleSeries, NormalizedSeries, VelocitySeries, GroundTruth]:
    """
    Generar la serie bruta, la normalizada, la velocidad y la verdad plantada

    Sin ruido se devuelve la velocidad analítica; con ruido se recorre el
    camino de producción (ruido en p, grados brutos, suavizado, normalización
    y diferencias finitas).

    Raises:
        SpecError: Si la especificación no es válida
    """
    validate_spec(spec)
    tiempos, p, v = analytic_signal(spec, profile)

    if spec.noise_sigma_p > 0:
        rng = np.random.default_rng(spec.seed)
        p = np.clip(p + rng.normal(0.0, spec.noise_sigma_p, len(p)), -1.0, 1.0)

    comunes = {
        "subject_id": profile.subject_id,
        "segment": profile.segment,
        "dof": profile.dof,
        "fps": spec.fps,
    }
    raw = AngleSeries(
        samples=tuple(
            AngleSample(t_s=float(t), theta_deg=denormalize(float(valor), profile))
            for t, valor in zip(tiempos, p)
        ),
        **comunes,
    )

    if spec.noise_sigma_p > 0:
        suavizada = smooth(raw, NOISE_SMOOTH_WINDOW)
        norm = normalize_series(suavizada, profile)
        vel = velocity(suavizada)
    else:
        norm = normalize_series(raw, profile)
        vel = VelocitySeries(
            samples=tuple(
                VelocitySample(t_s=float(t), v_deg_s=float(valor)) for t, valor in zip(tiempos, v)
            ),
            **comunes,
        )

    return raw, norm, vel, ground_truth(spec, profile, cfg)


def _iou(a, b) -> float:
    inter = min(a.end_s, b.end_s) - max(a.start_s, b.start_s)
    if inter <= 0:
        return 0.0
    return inter / (max(a.end_s, b.end_s) - min(a.start_s, b.start_s))


def _compatible(a, b) -> bool:
    if a.kind != b.kind:
        return False
    if isinstance(a, SpeedBand):
        return a.band == b.band
    return True


def evaluate(detected: Sequence, truth: GroundTruth, iou_min: float = 0.5) -> Evaluation:
    """
    Precisión y exhaustividad por tipo de evento

    Emparejamiento uno a uno, voraz por IoU descendente, entre eventos del
    mismo tipo (y de la misma banda para SpeedBand) con IoU >= iou_min.
    """
    pares = []
    for i, d in enumerate(detected):
        for j, g in enumerate(truth.events):
            if not _compatible(d, g):
                continue
            valor = _iou(d, g)
            if valor >= iou_min:
                pares.append((-valor, i, j))
    pares.sort()

    usados_d: set[int] = set()
    usados_g: set[int] = set()
    for _, i, j in pares:
        if i in usados_d or j in usados_g:
            continue
        usados_d.add(i)
        usados_g.add(j)

    scores = {}
    for kind in ("HOLD", "NOD", "SPEED"):
        scores[kind] = KindScore(
            kind=kind,
            matched=sum(1 for i in usados_d if detected[i].kind == kind),
            detected=sum(1 for e in detected if e.kind == kind),
            planted=sum(1 for e in truth.events if e.kind == kind),
        )
    return Evaluation(scores=scores)


def fixture_suite() -> dict[str, TrajectorySpec]:
    """Trayectorias de referencia con tenues, asentimientos, rampas y micro-oscilaciones"""

    def spec(*pieces) -> TrajectorySpec:
        return TrajectorySpec(duration_s=sum(p.duration_s for p in pieces), pieces=pieces)

    H, N, R = HoldPiece, NodPiece, RampPiece
    return {
        "hold_flx_moyen": spec(H(p=0.5, duration_s=2.5)),
        "hold_too_short": spec(H(p=0.5, duration_s=1.9)),
        "hold_neutral": spec(H(p=0.0, duration_s=3.0)),
        "hold_ext": spec(H(p=-0.5, duration_s=3.0)),
        "micro_osc_flx": spec(H(p=0.3, duration_s=3.0, wobble_p2p=0.03)),
        "micro_osc_ext": spec(H(p=-0.4, duration_s=3.0, wobble_p2p=0.05)),
        "micro_osc_neutral": spec(H(p=0.0, duration_s=2.8, wobble_p2p=0.04)),
        "nods_small_flx": spec(N(center_p=0.25, half_amp_p=0.07, cycles=4, cycle_s=0.5)),
        "nods_cross_neutral": spec(N(center_p=0.05, half_amp_p=0.25, cycles=2, cycle_s=0.6)),
        "nods_confined": spec(N(center_p=0.3, half_amp_p=0.15, cycles=3, cycle_s=0.6)),
        "nods_ext_side": spec(N(center_p=-0.3, half_amp_p=0.2, cycles=3, cycle_s=0.8)),
        "nods_large": spec(N(center_p=0.45, half_amp_p=0.4, cycles=2, cycle_s=0.8)),
        "hold_then_nods": spec(
            H(p=0.0, duration_s=2.5), N(center_p=0.0, half_amp_p=0.2, cycles=3, cycle_s=0.6)
        ),
        "nods_then_hold": spec(
            N(center_p=0.3, half_amp_p=0.15, cycles=2, cycle_s=0.6), H(p=0.3, duration_s=3.0)
        ),
        "ramp_only": spec(R(p_from=-0.5, p_to=0.7, duration_s=1.5)),
        "neutral_ext_nods_flx": spec(
            H(p=0.0, duration_s=2.5),
            R(p_from=0.0, p_to=-0.7, duration_s=1.5),
            R(p_from=-0.7, p_to=0.22, duration_s=1.5),
            N(center_p=0.22, half_amp_p=0.07, cycles=4, cycle_s=0.5),
            R(p_from=0.22, p_to=0.8, duration_s=1.5),
        ),
        "certainty_pattern": spec(
            N(center_p=0.05, half_amp_p=0.3, cycles=3, cycle_s=0.5),
            R(p_from=0.05, p_to=0.6, duration_s=1.5),
        ),
        "uncertainty_pattern": spec(
            R(p_from=0.0, p_to=0.5, duration_s=1.5), H(p=0.5, duration_s=3.0)
        ),
        "two_bursts": spec(
            N(center_p=0.0, half_amp_p=0.2, cycles=2, cycle_s=0.6),
            H(p=0.0, duration_s=2.5),
            N(center_p=0.0, half_amp_p=0.2, cycles=2, cycle_s=0.6),
        ),
        "merged_bursts": spec(
            N(center_p=0.0, half_amp_p=0.2, cycles=2, cycle_s=0.6),
            N(center_p=0.3, half_amp_p=0.15, cycles=2, cycle_s=0.6),
        ),
        "fast_tremor_then_ramp": spec(
            H(p=0.3, duration_s=3.0, wobble_p2p=0.05, wobble_hz=6.0),
            R(p_from=0.275, p_to=0.575, duration_s=1.5),
        ),
        "micro_hold_then_ramp": spec(
            H(p=-0.3, duration_s=2.5, wobble_p2p=0.05),
            R(p_from=-0.3, p_to=0.5, duration_s=2.0),
        ),
        "ext_hold_between_ramps": spec(
            R(p_from=0.0, p_to=-0.6, duration_s=1.5),
            H(p=-0.6, duration_s=3.0),
            R(p_from=-0.6, p_to=0.0, duration_s=1.5),
        ),
        "grand_hold_fast_ramps": spec(
            R(p_from=-0.2, p_to=0.7, duration_s=1.2),
            H(p=0.7, duration_s=2.5),
            R(p_from=0.7, p_to=-0.2, duration_s=1.2),
        ),
        "two_quiet_holds": spec(
            H(p=0.2, duration_s=2.2),
            R(p_from=0.2, p_to=-0.4, duration_s=1.5),
            H(p=-0.4, duration_s=2.6),
        ),
    }


def _sum_scores(evaluaciones: Sequence[Evaluation]) -> Evaluation:
    totales = {}
    for kind in ("HOLD", "NOD", "SPEED"):
        totales[kind] = KindScore(
            kind=kind,
            matched=sum(e.scores[kind].matched for e in evaluaciones),
            detected=sum(e.scores[kind].detected for e in evaluaciones),
            planted=sum(e.scores[kind].planted for e in evaluaciones),
        )
    return Evaluation(scores=totales)


def run_suite(
    specs: dict[str, TrajectorySpec],
    profile: CalibrationProfile,
    cfg: Optional[DetectorConfig] = None,
    noise_sigma_p: Optional[float] = None,
    iou_min: float = 0.5,
) -> SuiteReport:
    """
    Ejecutar los detectores sobre cada trayectoria y puntuarlos

    Args:
        specs: Trayectorias por nombre
        profile: Perfil con el que se convierten p y grados
        cfg: Umbrales de los detectores
        noise_sigma_p: Si se indica, sustituye el ruido de cada trayectoria
        iou_min: IoU mínimo para emparejar eventos
    """
    cfg = cfg or DetectorConfig()
    filas = []
    for semilla, (nombre, spec) in enumerate(specs.items()):
        if noise_sigma_p is not None:
            spec = spec.model_copy(update={"noise_sigma_p": noise_sigma_p, "seed": semilla})
        _, norm, vel, truth = generate(spec, profile, cfg)
        detectados = detect_all(norm, vel, cfg)
        filas.append(SuiteRow(name=nombre, evaluation=evaluate(detectados, truth, iou_min)))
        logger.debug("%s: %d eventos detectados, %d plantados", nombre, len(detectados), len(truth.events))
    return SuiteReport(rows=tuple(filas), totals=_sum_scores([f.evaluation for f in filas]))


def render_suite_table(report: SuiteReport) -> str:
    cabecera = f"{'trayectoria':<26}" + "".join(
        f"{kind + ' P':>9}{kind + ' R':>9}" for kind in ("HOLD", "NOD", "SPEED")
    )
    lineas = [cabecera]

    def fila(nombre: str, evaluacion: Evaluation) -> str:
        celdas = "".join(
            f"{evaluacion.scores[k].precision:>9.3f}{evaluacion.scores[k].recall:>9.3f}"
            for k in ("HOLD", "NOD", "SPEED")
        )
        return f"{nombre:<26}{celdas}"

    for row in report.rows:
        lineas.append(fila(row.name, row.evaluation))
    lineas.append(fila("TOTAL", report.totals))
    lineas.append(
        "F1: "
        + ", ".join(f"{k} {report.totals.scores[k].f1:.3f}" for k in ("HOLD", "NOD", "SPEED"))
    )
    return "\n".join(lineas) + "\n"
