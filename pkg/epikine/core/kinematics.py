"""
Cinemática del cuello: ángulo FLXEXT, suavizado y velocidad
"""

import logging
import math
from typing import Optional

import numpy as np

from epikine.errors import (
    ArgumentError,
    DegenerateGeometryError,
    EmptySeriesError,
    EstimationError,
)
from epikine.schemas import (
    NECK_FLXEXT,
    AngleSample,
    AngleSeries,
    Estimator,
    KeypointFrame,
    KeypointSchema,
    PoseTrack,
    Quality,
    SegmentId,
    VelocitySample,
    VelocitySeries,
)

logger = logging.getLogger(__name__)

LOW_CONFIDENCE = 0.3


def _keypoint(frame: KeypointFrame, schema: KeypointSchema, role: str) -> tuple[float, float, float]:
    if not schema.has(role):
        raise EstimationError(f"El esquema {schema.name.value} no define '{role}'", role)
    x, y, c = frame.points[schema.index(role)]
    if c <= 0.0 or not (math.isfinite(x) and math.isfinite(y)):
        raise EstimationError(
            f"Falta el punto clave '{role}' en el fotograma {frame.frame_index}", role
        )
    return x, y, c


def _midpoint(frame, schema, dedicated: str, left: str, right: str) -> tuple[np.ndarray, list[float]]:
    """Punto dedicado del esquema HALPE26 o punto medio del par izquierdo/derecho"""
    if schema.has(dedicated):
        x, y, c = _keypoint(frame, schema, dedicated)
        return np.array([x, y]), [c]
    xl, yl, cl = _keypoint(frame, schema, left)
    xr, yr, cr = _keypoint(frame, schema, right)
    return np.array([(xl + xr) / 2.0, (yl + yr) / 2.0]), [cl, cr]


def neck_flxext_angle(
    frame: KeypointFrame,
    schema: KeypointSchema,
    estimator: Estimator = Estimator.SAGITTAL_PROXY,
    low_confidence: float = LOW_CONFIDENCE,
    head_point: str = "nose",
) -> AngleSample:
    """
    Estimar el ángulo bruto de flexión/extensión del cuello en un fotograma

    SAGITTAL_PROXY: 100 * (y_cuello - y_cabeza) / anchura de hombros.
    INTERIOR_ANGLE: ángulo en el cuello entre cuello→cabeza y cuello→cadera media.

    Raises:
        EstimationError: Si falta un punto clave necesario
        DegenerateGeometryError: Si la geometría no permite medir el ángulo
    """
    x, y, c = _keypoint(frame, schema, head_point)
    head = np.array([x, y])
    neck, confianzas = _midpoint(frame, schema, "neck", "left_shoulder", "right_shoulder")
    confianzas = confianzas + [c]

    if estimator == Estimator.SAGITTAL_PROXY:
        xl, yl, cl = _keypoint(frame, schema, "left_shoulder")
        xr, yr, cr = _keypoint(frame, schema, "right_shoulder")
        confianzas += [cl, cr]
        anchura = math.hypot(xl - xr, yl - yr)
        if anchura == 0.0:
            raise DegenerateGeometryError(
                f"Anchura de hombros nula en el fotograma {frame.frame_index}", "left_shoulder"
            )
        theta = 100.0 * (neck[1] - head[1]) / anchura
    else:
        hip, c_hip = _midpoint(frame, schema, "mid_hip", "left_hip", "right_hip")
        confianzas += c_hip
        a = head - neck
        b = hip - neck
        na = float(np.hypot(*a))
        nb = float(np.hypot(*b))
        if na == 0.0 or nb == 0.0:
            raise DegenerateGeometryError(
                f"Vector de longitud nula en el fotograma {frame.frame_index}", "neck"
            )
        coseno = float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))
        theta = math.degrees(math.acos(coseno))

    if min(confianzas) < low_confidence:
        quality = Quality.LOW_CONFIDENCE
    elif frame.interpolated:
        quality = Quality.INTERPOLATED
    else:
        quality = Quality.GOOD
    return AngleSample(t_s=frame.timestamp_s, theta_deg=float(theta), quality=quality)


def angle_series(
    track: PoseTrack,
    estimator: Estimator = Estimator.SAGITTAL_PROXY,
    low_confidence: float = LOW_CONFIDENCE,
    subject_id: Optional[str] = None,
) -> AngleSeries:
    """
    Serie de ángulos brutos, una muestra por fotograma

    Los fotogramas sin estimación posible y los índices ausentes se marcan
    LOW_CONFIDENCE y conservan el valor anterior, para mantener el muestreo
    uniforme.

    Raises:
        EmptySeriesError: Si la trayectoria está vacía o no hay ninguna muestra GOOD
    """
    if not track.frames:
        raise EmptySeriesError(f"La trayectoria de la persona {track.person_id} está vacía")

    por_indice = {f.frame_index: f for f in track.frames}
    primero = track.frames[0].frame_index
    ultimo = track.frames[-1].frame_index

    estimados: list[Optional[AngleSample]] = []
    fallos = 0
    for fi in range(primero, ultimo + 1):
        frame = por_indice.get(fi)
        if frame is None:
            estimados.append(None)
            continue
        try:
            estimados.append(
                neck_flxext_angle(frame, track.keypoint_schema, estimator, low_confidence)
            )
        except EstimationError as e:
            fallos += 1
            logger.debug("%s", e)
            estimados.append(None)

    validos = [s for s in estimados if s is not None]
    if not any(s.quality == Quality.GOOD for s in validos):
        raise EmptySeriesError(
            f"La persona {track.person_id} no tiene ninguna muestra de buena calidad"
        )

    # Los fallos iniciales toman el primer valor estimado
    anterior = validos[0].theta_deg
    samples = []
    for offset, estimado in enumerate(estimados):
        t_s = (primero + offset) / track.fps
        if estimado is None:
            samples.append(AngleSample(t_s=t_s, theta_deg=anterior, quality=Quality.LOW_CONFIDENCE))
        else:
            anterior = estimado.theta_deg
            samples.append(estimado.model_copy(update={"t_s": t_s}))

    bajas = sum(1 for s in samples if s.quality == Quality.LOW_CONFIDENCE)
    if fallos:
        logger.warning("%d fotogramas sin estimación; se mantiene el valor anterior", fallos)
    logger.debug("%d muestras de baja confianza de %d", bajas, len(samples))

    return AngleSeries(
        subject_id=subject_id if subject_id is not None else str(track.person_id),
        segment=SegmentId.COU,
        dof=NECK_FLXEXT,
        fps=track.fps,
        samples=tuple(samples),
    )


def smooth(series: AngleSeries, window_frames: int) -> AngleSeries:
    """
    Media móvil centrada; en los bordes se usa la ventana asimétrica disponible

    Raises:
        ArgumentError: Si la ventana es par o no positiva
    """
    if window_frames < 1 or window_frames % 2 == 0:
        raise ArgumentError(f"La ventana debe ser impar y positiva (recibido {window_frames})")
    if window_frames == 1 or len(series) == 0:
        return series

    theta = series.values()
    nucleo = np.ones(window_frames)
    centro = slice(window_frames // 2, window_frames // 2 + len(theta))
    # Desviaciones respecto a la primera muestra: una serie constante da ceros exactos
    desvio = np.convolve(theta - theta[0], nucleo)[centro]
    cuenta = np.convolve(np.ones(len(theta)), nucleo)[centro]
    medias = theta[0] + desvio / cuenta

    samples = tuple(
        s.model_copy(update={"theta_deg": float(m)}) for s, m in zip(series.samples, medias)
    )
    return series.model_copy(update={"samples": samples})


def velocity(series: AngleSeries) -> VelocitySeries:
    """
    Derivada temporal en grados/segundo por diferencias finitas

    Diferencia central en las muestras interiores y diferencias laterales en
    los extremos.

    Raises:
        ArgumentError: Si la serie tiene menos de 2 muestras
    """
    if len(series) < 2:
        raise ArgumentError("Se necesitan al menos 2 muestras para calcular la velocidad")

    theta = series.values()
    fps = series.fps
    v = np.empty_like(theta)
    v[1:-1] = (theta[2:] - theta[:-2]) * fps / 2.0
    v[0] = (theta[1] - theta[0]) * fps
    v[-1] = (theta[-1] - theta[-2]) * fps

    samples = tuple(
        VelocitySample(t_s=s.t_s, v_deg_s=float(val), quality=s.quality)
        for s, val in zip(series.samples, v)
    )
    return VelocitySeries(
        subject_id=series.subject_id,
        segment=series.segment,
        dof=series.dof,
        fps=fps,
        samples=samples,
    )
