"""
Calibración por sujeto y crantage Typannot

Proyecta los grados brutos sobre una escala normalizada con signo
(+1 butée de flexión, 0 reposo, -1 butée de extensión) y la discretiza en
nueve crans.
"""

import logging
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from epikine.errors import (
    ArgumentError,
    CalibrationError,
    CalibrationOrderError,
    CalibrationRangeError,
    MissingLandmarkError,
    ProfileMismatchError,
)
from epikine.schemas import (
    AngleSeries,
    CalibrationProfile,
    Landmark,
    NormalizedSample,
    NormalizedSeries,
    Notch,
)

logger = logging.getLogger(__name__)

LANDMARK_WINDOW_S = 0.2

# Límites superiores (excluidos) de |p| para los grados 0..3; el resto es butée
NOTCH_BOUNDARIES = (0.125, 0.375, 0.625, 0.875)


def build_profile(
    series: AngleSeries,
    landmarks: Mapping[Union[Landmark, str], float],
    subject_id: Optional[str] = None,
) -> CalibrationProfile:
    """
    Construir el perfil a partir de tres instantes anotados

    Cada ángulo del perfil es la mediana de theta en una ventana de ±0.2 s
    alrededor del instante del hito.

    Args:
        series: Serie de ángulos brutos del sujeto
        landmarks: Instante (s) de REST, FLX_LIMIT y EXT_LIMIT
        subject_id: Identificador del sujeto (por defecto, el de la serie)

    Raises:
        MissingLandmarkError: Si falta alguno de los tres hitos
        CalibrationRangeError: Si un hito cae fuera de la serie
        CalibrationOrderError: Si el reposo no queda entre las butées
    """
    hitos = {Landmark(k): float(v) for k, v in landmarks.items()}
    for requerido in Landmark:
        if requerido not in hitos:
            raise MissingLandmarkError(
                f"Falta el hito de calibración {requerido.value}", requerido.value
            )

    tiempos = series.times()
    theta = series.values()
    inicio, fin = series.span()
    angulos = {}
    for hito, t in hitos.items():
        if len(series) == 0 or not inicio <= t < fin:
            raise CalibrationRangeError(
                f"El hito {hito.value} ({t:.3f} s) está fuera de la serie [{inicio:.3f}, {fin:.3f})"
            )
        ventana = np.abs(tiempos - t) <= LANDMARK_WINDOW_S + 1e-9
        angulos[hito] = float(np.median(theta[ventana]))

    rest = angulos[Landmark.REST]
    flx = angulos[Landmark.FLX_LIMIT]
    ext = angulos[Landmark.EXT_LIMIT]
    if len({rest, flx, ext}) < 3:
        raise CalibrationOrderError(
            f"Los ángulos de los hitos deben ser distintos (reposo {rest:.2f}°, "
            f"FLX {flx:.2f}°, EXT {ext:.2f}°)"
        )
    try:
        profile = CalibrationProfile(
            subject_id=subject_id if subject_id is not None else series.subject_id,
            segment=series.segment,
            dof=series.dof,
            rest_deg=rest,
            flx_limit_deg=flx,
            ext_limit_deg=ext,
        )
    except ValidationError as e:
        raise CalibrationOrderError(
            f"El reposo ({rest:.2f}°) no está entre las butées (FLX {flx:.2f}°, EXT {ext:.2f}°)"
        ) from e

    if profile.orientation < 0:
        logger.warning(
            "Orientación invertida: la flexión disminuye los grados brutos (sujeto %s)",
            profile.subject_id,
        )
    return profile


def normalize(theta_deg: float, profile: CalibrationProfile) -> float:
    """Proyección lineal a trozos de theta sobre [-1, +1]"""
    delta = theta_deg - profile.rest_deg
    if delta * profile.orientation >= 0:
        p = delta / (profile.flx_limit_deg - profile.rest_deg)
    else:
        p = -delta / (profile.ext_limit_deg - profile.rest_deg)
    return min(1.0, max(-1.0, p))


def denormalize(p: float, profile: CalibrationProfile) -> float:
    """Inversa de normalize sobre [-1, +1]"""
    if not -1.0 <= p <= 1.0:
        raise ArgumentError(f"p fuera de [-1, 1]: {p}")
    if p >= 0:
        return profile.rest_deg + p * (profile.flx_limit_deg - profile.rest_deg)
    return profile.rest_deg - p * (profile.ext_limit_deg - profile.rest_deg)


def notch_of(p: float) -> Notch:
    """
    Cran de un valor normalizado

    Un valor exactamente en una frontera toma el cran mayor (hacia la butée).

    Raises:
        ArgumentError: Si |p| > 1
    """
    magnitud = abs(p)
    if magnitud > 1.0:
        raise ArgumentError(f"p fuera de [-1, 1]: {p}")
    grado = 4
    for g, limite in enumerate(NOTCH_BOUNDARIES):
        if magnitud < limite:
            grado = g
            break
    return Notch(grado if p >= 0 else -grado)


def notch_interval(notch: Notch) -> tuple[float, float]:
    """Intervalo de p de un cran (extremos en orden creciente)"""
    grado = notch.grade
    if grado == 0:
        return -NOTCH_BOUNDARIES[0], NOTCH_BOUNDARIES[0]
    bajo = NOTCH_BOUNDARIES[grado - 1]
    alto = NOTCH_BOUNDARIES[grado] if grado < 4 else 1.0
    if notch > 0:
        return bajo, alto
    return -alto, -bajo


def check_axis(series, profile: CalibrationProfile) -> None:
    if series.segment != profile.segment or series.dof != profile.dof:
        raise ProfileMismatchError(
            f"El perfil es de {profile.segment.value}:{profile.dof} y la serie de "
            f"{series.segment.value}:{series.dof}"
        )


def normalize_series(series: AngleSeries, profile: CalibrationProfile) -> NormalizedSeries:
    """
    Normalizar y discretizar una serie completa

    Raises:
        ProfileMismatchError: Si el segmento o el DDL del perfil no coinciden
    """
    check_axis(series, profile)
    samples = []
    for s in series.samples:
        p = normalize(s.theta_deg, profile)
        samples.append(NormalizedSample(t_s=s.t_s, p=p, notch=notch_of(p), quality=s.quality))
    return NormalizedSeries(
        subject_id=series.subject_id,
        segment=series.segment,
        dof=series.dof,
        fps=series.fps,
        samples=tuple(samples),
    )


class CorrespondenceRow(BaseModel):
    """Fila de la tabla de correspondencia grados brutos ↔ cran"""

    model_config = ConfigDict(frozen=True)

    label: str
    notch: Notch
    p_low: float
    p_high: float
    deg_low: float
    deg_high: float


def correspondence_table(profile: CalibrationProfile) -> list[CorrespondenceRow]:
    """Tabla por cran (de la butée de flexión a la de extensión) y los tres anclajes"""
    filas = []
    for notch in sorted(Notch, reverse=True):
        p_low, p_high = notch_interval(notch)
        grados = sorted((denormalize(p_low, profile), denormalize(p_high, profile)))
        filas.append(
            CorrespondenceRow(
                label=notch.name,
                notch=notch,
                p_low=p_low,
                p_high=p_high,
                deg_low=grados[0],
                deg_high=grados[1],
            )
        )
    anclajes = (
        ("butée FLX", profile.flx_limit_deg),
        ("reposo", profile.rest_deg),
        ("butée EXT", profile.ext_limit_deg),
    )
    for label, grados in anclajes:
        p = normalize(grados, profile)
        filas.append(
            CorrespondenceRow(
                label=label, notch=notch_of(p), p_low=p, p_high=p, deg_low=grados, deg_high=grados
            )
        )
    return filas


def render_correspondence(profile: CalibrationProfile) -> str:
    lineas = [
        f"Sujeto {profile.subject_id} ({profile.segment.value}:{profile.dof})",
        f"{'fila':<12}{'cran':<12}{'p':>18}{'grados':>22}",
    ]
    for fila in correspondence_table(profile):
        if fila.p_low == fila.p_high:
            p = f"{fila.p_low:+.4f}"
            grados = f"{fila.deg_low:.2f}°"
        else:
            p = f"[{fila.p_low:+.3f}, {fila.p_high:+.3f}]"
            grados = f"[{fila.deg_low:.2f}°, {fila.deg_high:.2f}°]"
        lineas.append(f"{fila.label:<12}{fila.notch.name:<12}{p:>18}{grados:>22}")
    return "\n".join(lineas) + "\n"


def save_profile(profile: CalibrationProfile) -> str:
    return profile.model_dump_json(indent=2) + "\n"


def load_profile(path: Union[str, Path]) -> CalibrationProfile:
    """
    Leer un perfil JSON

    Raises:
        CalibrationError: Si el archivo no existe o no es un perfil válido
    """
    ruta = Path(path)
    try:
        return CalibrationProfile.model_validate_json(ruta.read_bytes())
    except OSError as e:
        raise CalibrationError(f"No se puede leer el perfil {ruta}: {e}") from e
    except ValidationError as e:
        raise CalibrationError(f"Perfil inválido en {ruta}: {e}") from e
