"""
Fixtures compartidas: perfiles de referencia, constructores de series,
registros de poses y documentos ELAN
"""

import json

import numpy as np
import pytest

from epikine.core.calibration import notch_of
from epikine.schemas import (
    COCO17,
    AngleSample,
    AngleSeries,
    CalibrationProfile,
    KeypointFrame,
    NormalizedSample,
    NormalizedSeries,
    VelocitySample,
    VelocitySeries,
)

FPS = 25.0


@pytest.fixture
def perfil_fr() -> CalibrationProfile:
    """Locutor francés: reposo 104°, butée FLX 140°, butée EXT 88°"""
    return CalibrationProfile(subject_id="fr", rest_deg=104.0, flx_limit_deg=140.0, ext_limit_deg=88.0)


@pytest.fixture
def perfil_lsf() -> CalibrationProfile:
    """Signante LSF: reposo 97°, butée FLX 137°, butée EXT 53°"""
    return CalibrationProfile(subject_id="lsf", rest_deg=97.0, flx_limit_deg=137.0, ext_limit_deg=53.0)


def serie_angulos(thetas, fps: float = FPS, subject_id: str = "s") -> AngleSeries:
    return AngleSeries(
        subject_id=subject_id,
        fps=fps,
        samples=tuple(AngleSample(t_s=i / fps, theta_deg=float(th)) for i, th in enumerate(thetas)),
    )


def serie_normalizada(ps, fps: float = FPS, subject_id: str = "s") -> NormalizedSeries:
    return NormalizedSeries(
        subject_id=subject_id,
        fps=fps,
        samples=tuple(
            NormalizedSample(t_s=i / fps, p=float(p), notch=notch_of(float(p))) for i, p in enumerate(ps)
        ),
    )


def serie_velocidad(vs, fps: float = FPS, subject_id: str = "s") -> VelocitySeries:
    return VelocitySeries(
        subject_id=subject_id,
        fps=fps,
        samples=tuple(VelocitySample(t_s=i / fps, v_deg_s=float(v)) for i, v in enumerate(vs)),
    )


# Puntos COCO17 de un locutor de frente: hombros a 40 px, nariz sobre el cuello
def puntos_coco(
    nose=(100.0, 50.0, 0.9),
    left_shoulder=(80.0, 100.0, 0.9),
    right_shoulder=(120.0, 100.0, 0.9),
    left_hip=(90.0, 200.0, 0.9),
    right_hip=(110.0, 200.0, 0.9),
    dx: float = 0.0,
) -> list[tuple[float, float, float]]:
    puntos = [(0.0, 0.0, 0.0)] * COCO17.keypoint_count
    for rol, (x, y, c) in {
        "nose": nose,
        "left_shoulder": left_shoulder,
        "right_shoulder": right_shoulder,
        "left_hip": left_hip,
        "right_hip": right_hip,
    }.items():
        puntos[COCO17.index(rol)] = (x + dx, y, c)
    return puntos


def fotograma(frame_index: int, puntos=None, fps: float = FPS, person_id: int = 0, interpolated: bool = False):
    puntos = puntos or puntos_coco()
    return KeypointFrame(
        frame_index=frame_index,
        timestamp_s=frame_index / fps,
        points=tuple(puntos),
        person_id=person_id,
        bbox=(80.0, 50.0, 40.0, 150.0),
        score=0.95,
        interpolated=interpolated,
    )


def registro_json(image_id, puntos=None, idx=None, box=None, score: float = 0.95) -> dict:
    puntos = puntos or puntos_coco()
    registro = {
        "image_id": image_id,
        "keypoints": [v for punto in puntos for v in punto],
        "score": score,
    }
    if idx is not None:
        registro["idx"] = idx
    if box is not None:
        registro["box"] = list(box)
    return registro


def archivo_poses(registros) -> bytes:
    return json.dumps(registros).encode("utf-8")


def nariz_para(theta_deg: float) -> float:
    """Altura de la nariz que da theta_deg con el estimador proxy y los hombros por defecto"""
    return 100.0 - theta_deg * 40.0 / 100.0


def poses_desde_angulos(thetas) -> bytes:
    return archivo_poses(
        [
            registro_json(f"{i:06d}.jpg", puntos_coco(nose=(100.0, nariz_para(th), 0.9)), idx=0)
            for i, th in enumerate(thetas)
        ]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(7)
