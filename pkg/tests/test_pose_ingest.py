import itertools
import json

import numpy as np
import pytest

from conftest import archivo_poses, fotograma, puntos_coco, registro_json
from epikine.core.pose_ingest import (
    choose_default_subject,
    fill_gaps,
    parse_pose_file,
    select_subject,
    serialize_tracks,
)
from epikine.errors import ArgumentError, KeypointSchemaError, PoseParseError, SubjectNotFoundError
from epikine.schemas import COCO17, HALPE26, DetectionRegion, PoseTrack


def test_lectura_basica():
    datos = archivo_poses([registro_json(0, idx=1), registro_json(1, idx=1)])
    tracks = parse_pose_file(datos, COCO17, 25.0)
    assert len(tracks) == 1
    track = tracks[0]
    assert track.person_id == 1
    assert [f.frame_index for f in track.frames] == [0, 1]
    assert track.frames[1].timestamp_s == pytest.approx(0.04)
    assert track.frames[0].score == 0.95


@pytest.mark.parametrize("image_id, esperado", [("000123.jpg", 123), ("clip7/frame_0042.png", 42), (17, 17)])
def test_indice_de_fotograma(image_id, esperado):
    tracks = parse_pose_file(archivo_poses([registro_json(image_id, idx=0)]), COCO17, 25.0)
    assert tracks[0].frames[0].frame_index == esperado


def test_image_id_sin_digitos():
    with pytest.raises(KeypointSchemaError, match="image_id"):
        parse_pose_file(archivo_poses([registro_json("portada.jpg", idx=0)]), COCO17, 25.0)


def test_json_mal_formado_indica_el_byte():
    with pytest.raises(PoseParseError) as info:
        parse_pose_file(b'[{"image_id": 0,', COCO17, 25.0)
    assert info.value.byte_offset == 16
    assert info.value.exit_code == 2


def test_raiz_no_es_un_arreglo():
    with pytest.raises(PoseParseError):
        parse_pose_file(b'{"image_id": 0}', COCO17, 25.0)


def test_numero_de_puntos_incorrecto():
    registro = registro_json(0, idx=0)
    registro["keypoints"] = registro["keypoints"][:-3]
    with pytest.raises(KeypointSchemaError, match="Registro 0"):
        parse_pose_file(archivo_poses([registro]), COCO17, 25.0)
    with pytest.raises(KeypointSchemaError, match="HALPE26"):
        parse_pose_file(archivo_poses([registro_json(0, idx=0)]), HALPE26, 25.0)


def test_fps_invalido():
    with pytest.raises(ArgumentError):
        parse_pose_file(b"[]", COCO17, 0.0)


def test_archivo_vacio():
    assert parse_pose_file(b"[]", COCO17, 25.0) == []


def test_confianzas_recortadas():
    puntos = puntos_coco(nose=(100.0, 50.0, 1.7), left_hip=(90.0, 200.0, -0.2))
    track = parse_pose_file(archivo_poses([registro_json(0, puntos, idx=0)]), COCO17, 25.0)[0]
    assert track.frames[0].points[COCO17.index("nose")][2] == 1.0
    assert track.frames[0].points[COCO17.index("left_hip")][2] == 0.0


def test_registros_duplicados():
    datos = archivo_poses([registro_json(3, idx=0), registro_json("000003.jpg", idx=0)])
    with pytest.raises(KeypointSchemaError, match="Registros 0 y 1"):
        parse_pose_file(datos, COCO17, 25.0)


def test_seguimiento_por_iou_sin_idx():
    registros = []
    for fi in range(3):
        # Las dos personas se listan en orden distinto en cada fotograma
        izquierda = registro_json(fi, puntos_coco(dx=-300.0 + fi), box=(-220.0 + fi, 50.0, 40.0, 150.0))
        derecha = registro_json(fi, puntos_coco(dx=300.0 - fi), box=(380.0 - fi, 50.0, 40.0, 150.0))
        registros.extend([izquierda, derecha] if fi % 2 == 0 else [derecha, izquierda])
    tracks = parse_pose_file(archivo_poses(registros), COCO17, 25.0)
    assert len(tracks) == 2
    assert all(len(t.frames) == 3 for t in tracks)
    assert [f.bbox[0] for f in tracks[0].frames] == [-220.0, -219.0, -218.0]
    assert [f.bbox[0] for f in tracks[1].frames] == [380.0, 379.0, 378.0]


def test_serializar_y_volver_a_leer():
    registros = [registro_json(fi, idx=pid, box=(10.0 * pid, 0.0, 5.0, 5.0)) for fi in range(4) for pid in (0, 2)]
    tracks = parse_pose_file(archivo_poses(registros), COCO17, 25.0)
    datos = serialize_tracks(tracks)
    assert parse_pose_file(datos, COCO17, 25.0) == tracks
    assert [(r["image_id"], r["idx"]) for r in json.loads(datos)][:3] == [(0, 0), (0, 2), (1, 0)]


def _track(person_id, frames, bbox):
    return PoseTrack(
        person_id=person_id,
        fps=25.0,
        keypoint_schema=COCO17,
        frames=tuple(
            fotograma(fi, person_id=person_id).model_copy(update={"bbox": bbox}) for fi in frames
        ),
    )


def test_seleccion_del_sujeto_por_region():
    dentro = _track(0, range(5), (0.0, 0.0, 100.0, 100.0))
    fuera = _track(1, range(10), (500.0, 500.0, 100.0, 100.0))
    region = DetectionRegion.parse("0,0,200,200")
    assert select_subject([fuera, dentro], region).person_id == 0

    with pytest.raises(SubjectNotFoundError):
        select_subject([fuera], region)


def test_seleccion_desempata_por_area_y_por_id():
    pequena = _track(0, range(5), (40.0, 40.0, 20.0, 20.0))
    grande = _track(1, range(5), (0.0, 0.0, 100.0, 100.0))
    gemela = _track(2, range(5), (0.0, 0.0, 100.0, 100.0))
    region = DetectionRegion(x=0, y=0, w=200, h=200)
    assert select_subject([pequena, gemela, grande], region).person_id == 1


def test_sujeto_por_defecto():
    corta = _track(0, range(3), (0.0, 0.0, 1.0, 1.0))
    larga = _track(1, range(8), (0.0, 0.0, 1.0, 1.0))
    assert choose_default_subject([corta, larga]).person_id == 1
    with pytest.raises(SubjectNotFoundError):
        choose_default_subject([])


def test_rellenar_huecos():
    a = fotograma(0, puntos_coco(nose=(100.0, 50.0, 0.9)))
    b = fotograma(3, puntos_coco(nose=(100.0, 80.0, 0.6)))
    track = PoseTrack(person_id=0, fps=25.0, keypoint_schema=COCO17, frames=(a, b))

    relleno = fill_gaps(track, 2)
    assert [f.frame_index for f in relleno.frames] == [0, 1, 2, 3]
    medio = relleno.frames[1]
    assert medio.interpolated
    assert medio.timestamp_s == pytest.approx(0.04)
    assert medio.points[COCO17.index("nose")] == pytest.approx((100.0, 60.0, 0.6))

    assert fill_gaps(track, 1) == track
    with pytest.raises(ArgumentError):
        fill_gaps(track, -1)


@pytest.mark.parametrize("orden", list(itertools.permutations(range(3))))
def test_seleccion_independiente_del_orden(orden):
    candidatas = [
        _track(0, range(5), (0.0, 0.0, 100.0, 100.0)),
        _track(1, range(5), (0.0, 0.0, 100.0, 100.0)),
        _track(2, range(5), (40.0, 40.0, 20.0, 20.0)),
    ]
    region = DetectionRegion(x=0, y=0, w=200, h=200)
    permutadas = [candidatas[i] for i in orden]
    assert select_subject(permutadas, region).person_id == 0
    assert choose_default_subject(permutadas).person_id == 0


@pytest.mark.parametrize("semilla", range(6))
def test_rellenar_huecos_no_toca_los_fotogramas_originales(semilla):
    rng = np.random.default_rng(semilla)
    indices = sorted(int(i) for i in rng.choice(60, size=15, replace=False))
    originales = tuple(fotograma(fi, puntos_coco(nose=(100.0, 40.0 + fi, 0.9))) for fi in indices)
    track = PoseTrack(person_id=0, fps=25.0, keypoint_schema=COCO17, frames=originales)
    max_gap = int(rng.integers(0, 6))

    relleno = fill_gaps(track, max_gap)
    por_indice = {f.frame_index: f for f in relleno.frames}
    for frame in originales:
        assert por_indice[frame.frame_index] == frame

    huecos = [b - a - 1 for a, b in zip(indices, indices[1:])]
    assert len(relleno.frames) == len(indices) + sum(h for h in huecos if h <= max_gap)
    for frame in relleno.frames:
        if frame.frame_index in indices:
            continue
        assert frame.interpolated
        previo = max(i for i in indices if i < frame.frame_index)
        siguiente = min(i for i in indices if i > frame.frame_index)
        assert siguiente - previo - 1 <= max_gap
