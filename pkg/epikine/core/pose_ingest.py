"""
Lectura de archivos de poses (formato de resultados de AlphaPose)

Convierte el arreglo JSON de detecciones en trayectorias por persona,
elige al locutor dentro del cuadro de detección y rellena los huecos cortos.
"""

import json
import logging
import math
import re
from collections import defaultdict
from typing import Sequence

from epikine.errors import (
    ArgumentError,
    KeypointSchemaError,
    PoseParseError,
    SubjectNotFoundError,
)
from epikine.schemas import DetectionRegion, KeypointFrame, KeypointSchema, PoseTrack

logger = logging.getLogger(__name__)

IOU_MIN = 0.3

_TRAILING_DIGITS = re.compile(r"(\d+)$")


def _frame_index(image_id, record_no: int) -> int:
    """Extraer el índice de fotograma de image_id (entero o nombre de archivo)"""
    if isinstance(image_id, bool):
        raise KeypointSchemaError(f"Registro {record_no}: image_id inválido ({image_id!r})")
    if isinstance(image_id, int):
        if image_id < 0:
            raise KeypointSchemaError(f"Registro {record_no}: image_id negativo ({image_id})")
        return image_id
    if isinstance(image_id, str):
        base = image_id.rsplit("/", 1)[-1]
        if "." in base:
            base = base.rsplit(".", 1)[0]
        match = _TRAILING_DIGITS.search(base)
        if match:
            return int(match.group(1))
    raise KeypointSchemaError(
        f"Registro {record_no}: no se puede obtener el fotograma de image_id {image_id!r}"
    )


def _box_from_points(points) -> tuple[float, float, float, float]:
    xs = [x for x, _, _ in points if math.isfinite(x)]
    ys = [y for _, y, _ in points if math.isfinite(y)]
    if not xs or not ys:
        return 0.0, 0.0, 0.0, 0.0
    return min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys)


def _iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    if union <= 0:
        return 0.0
    return inter / union


def _parse_record(raw, record_no: int, schema: KeypointSchema) -> dict:
    if not isinstance(raw, dict):
        raise KeypointSchemaError(f"Registro {record_no}: se esperaba un objeto JSON")
    if "image_id" not in raw or "keypoints" not in raw:
        raise KeypointSchemaError(f"Registro {record_no}: faltan image_id o keypoints")

    flat = raw["keypoints"]
    esperado = 3 * schema.keypoint_count
    if not isinstance(flat, list) or len(flat) != esperado:
        recibido = len(flat) if isinstance(flat, list) else type(flat).__name__
        raise KeypointSchemaError(
            f"Registro {record_no} (image_id {raw.get('image_id')!r}): {recibido} valores de "
            f"keypoints, el esquema {schema.name.value} exige {esperado}"
        )
    try:
        valores = [float(v) for v in flat]
    except (TypeError, ValueError) as e:
        raise KeypointSchemaError(f"Registro {record_no}: keypoints no numéricos") from e

    # Las confianzas fuera de [0, 1] se recortan
    points = tuple(
        (valores[i], valores[i + 1], min(1.0, max(0.0, valores[i + 2])))
        for i in range(0, esperado, 3)
    )

    box = raw.get("box")
    if box is None:
        bbox = _box_from_points(points)
    else:
        if not isinstance(box, list) or len(box) != 4:
            raise KeypointSchemaError(f"Registro {record_no}: box debe ser [x, y, w, h]")
        bbox = tuple(float(v) for v in box)

    idx = raw.get("idx")
    if idx is not None and (isinstance(idx, bool) or not isinstance(idx, (int, float))):
        raise KeypointSchemaError(f"Registro {record_no}: idx debe ser un entero")

    return {
        "record_no": record_no,
        "frame_index": _frame_index(raw["image_id"], record_no),
        "points": points,
        "bbox": bbox,
        "score": float(raw.get("score", 0.0)),
        "idx": None if idx is None else int(idx),
    }


def _assign_by_iou(records: list[dict]) -> None:
    """Asignar identidades por IoU voraz contra la última caja de cada trayectoria"""
    ultimas: dict[int, tuple] = {}
    siguiente = 0
    por_fotograma: dict[int, list[dict]] = defaultdict(list)
    for rec in records:
        por_fotograma[rec["frame_index"]].append(rec)

    for frame_index in sorted(por_fotograma):
        grupo = por_fotograma[frame_index]
        pares = []
        for i, rec in enumerate(grupo):
            for pid, caja in ultimas.items():
                valor = _iou(rec["bbox"], caja)
                if valor >= IOU_MIN:
                    pares.append((-valor, pid, i))
        pares.sort()
        usados_rec: set[int] = set()
        usados_pid: set[int] = set()
        for _, pid, i in pares:
            if i in usados_rec or pid in usados_pid:
                continue
            grupo[i]["idx"] = pid
            usados_rec.add(i)
            usados_pid.add(pid)
        for i, rec in enumerate(grupo):
            if i not in usados_rec:
                rec["idx"] = siguiente
                siguiente += 1
            ultimas[rec["idx"]] = rec["bbox"]


def parse_pose_file(data: bytes, schema: KeypointSchema, fps: float) -> list[PoseTrack]:
    """
    Leer un archivo de resultados de estimación de poses

    Args:
        data: Contenido del archivo (arreglo JSON en UTF-8)
        schema: Esquema de puntos clave esperado
        fps: Fotogramas por segundo del vídeo de origen

    Returns:
        Una trayectoria por persona, ordenadas por person_id

    Raises:
        ArgumentError: Si fps <= 0
        PoseParseError: Si el JSON está mal formado (con desplazamiento en bytes)
        KeypointSchemaError: Si un registro no respeta el esquema
    """
    if not fps > 0:
        raise ArgumentError(f"fps debe ser positivo (recibido {fps})")

    try:
        texto = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise PoseParseError(f"El archivo no es UTF-8 válido (byte {e.start})", e.start) from e
    try:
        contenido = json.loads(texto)
    except json.JSONDecodeError as e:
        offset = len(texto[: e.pos].encode("utf-8"))
        raise PoseParseError(f"JSON mal formado en el byte {offset}: {e.msg}", offset) from e
    if not isinstance(contenido, list):
        raise PoseParseError("Se esperaba un arreglo JSON de detecciones", 0)

    records = [_parse_record(raw, n, schema) for n, raw in enumerate(contenido)]
    if not records:
        return []

    if any(rec["idx"] is None for rec in records):
        logger.info("Registros sin idx: identidades asignadas por IoU")
        _assign_by_iou(records)

    agrupados: dict[int, dict[int, dict]] = defaultdict(dict)
    for rec in records:
        por_persona = agrupados[rec["idx"]]
        previo = por_persona.get(rec["frame_index"])
        if previo is not None:
            raise KeypointSchemaError(
                f"Registros {previo['record_no']} y {rec['record_no']}: misma persona "
                f"({rec['idx']}) en el fotograma {rec['frame_index']}"
            )
        por_persona[rec["frame_index"]] = rec

    tracks = []
    for person_id in sorted(agrupados):
        frames = tuple(
            KeypointFrame(
                frame_index=fi,
                timestamp_s=fi / fps,
                points=rec["points"],
                person_id=person_id,
                bbox=rec["bbox"],
                score=rec["score"],
            )
            for fi, rec in sorted(agrupados[person_id].items())
        )
        tracks.append(
            PoseTrack(person_id=person_id, fps=fps, keypoint_schema=schema, frames=frames)
        )

    logger.info("%d registros leídos en %d trayectorias", len(records), len(tracks))
    return tracks


def serialize_tracks(tracks: Sequence[PoseTrack]) -> bytes:
    """Escribir trayectorias en el formato JSON de entrada (ordenado por fotograma y persona)"""
    filas = []
    for track in tracks:
        for frame in track.frames:
            filas.append((frame.frame_index, track.person_id, frame))
    filas.sort(key=lambda f: (f[0], f[1]))

    salida = []
    for frame_index, person_id, frame in filas:
        flat = []
        for x, y, c in frame.points:
            flat.extend((x, y, c))
        salida.append(
            {
                "image_id": frame_index,
                "keypoints": flat,
                "score": frame.score,
                "box": list(frame.bbox),
                "idx": person_id,
            }
        )
    return json.dumps(salida).encode("utf-8")


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def select_subject(tracks: Sequence[PoseTrack], region: DetectionRegion) -> PoseTrack:
    """
    Elegir al locutor dentro del cuadro de detección

    Gana la trayectoria cuyo centro de caja cae dentro de la región en la mayor
    fracción de fotogramas; empate: mayor área media, luego menor person_id.

    Raises:
        ArgumentError: Si no hay trayectorias
        SubjectNotFoundError: Si ninguna trayectoria entra nunca en la región
    """
    if not tracks:
        raise ArgumentError("No hay trayectorias entre las que elegir")

    candidatos = []
    for track in tracks:
        if not track.frames:
            continue
        dentro = sum(1 for f in track.frames if region.contains(*f.bbox_center))
        fraccion = dentro / len(track.frames)
        area = _mean([f.bbox_area for f in track.frames])
        candidatos.append((fraccion, area, -track.person_id, track))

    candidatos = [c for c in candidatos if c[0] > 0]
    if not candidatos:
        raise SubjectNotFoundError(
            f"Ninguna persona aparece en la región ({region.x}, {region.y}, {region.w}, {region.h})"
        )

    elegido = max(candidatos, key=lambda c: c[:3])
    logger.info(
        "Sujeto elegido: persona %d (%.0f%% de fotogramas en la región)",
        elegido[3].person_id,
        elegido[0] * 100,
    )
    return elegido[3]


def choose_default_subject(tracks: Sequence[PoseTrack]) -> PoseTrack:
    """Sin región: la trayectoria con más fotogramas (empate: menor person_id)"""
    if not tracks:
        raise SubjectNotFoundError("El archivo de poses no contiene ninguna persona")
    elegido = max(tracks, key=lambda t: (len(t.frames), -t.person_id))
    logger.info("Sujeto por defecto: persona %d", elegido.person_id)
    return elegido


def _interpolate(a: KeypointFrame, b: KeypointFrame, frame_index: int, fps: float) -> KeypointFrame:
    w = (frame_index - a.frame_index) / (b.frame_index - a.frame_index)
    points = tuple(
        (xa + (xb - xa) * w, ya + (yb - ya) * w, min(ca, cb))
        for (xa, ya, ca), (xb, yb, cb) in zip(a.points, b.points)
    )
    bbox = tuple(va + (vb - va) * w for va, vb in zip(a.bbox, b.bbox))
    return KeypointFrame(
        frame_index=frame_index,
        timestamp_s=frame_index / fps,
        points=points,
        person_id=a.person_id,
        bbox=bbox,
        score=min(a.score, b.score),
        interpolated=True,
    )


def fill_gaps(track: PoseTrack, max_gap_frames: int) -> PoseTrack:
    """
    Rellenar huecos cortos por interpolación lineal de cada punto clave

    Args:
        track: Trayectoria de entrada
        max_gap_frames: Máximo de fotogramas ausentes que se rellenan

    Returns:
        Trayectoria con los huecos cortos rellenados; los largos quedan sin tocar

    Raises:
        ArgumentError: Si max_gap_frames es negativo
    """
    if max_gap_frames < 0:
        raise ArgumentError(f"max_gap_frames debe ser >= 0 (recibido {max_gap_frames})")

    frames: list[KeypointFrame] = []
    rellenados = 0
    sin_rellenar = 0
    for a, b in zip(track.frames, track.frames[1:]):
        frames.append(a)
        hueco = b.frame_index - a.frame_index - 1
        if hueco == 0:
            continue
        if hueco <= max_gap_frames:
            frames.extend(
                _interpolate(a, b, fi, track.fps) for fi in range(a.frame_index + 1, b.frame_index)
            )
            rellenados += 1
        else:
            sin_rellenar += 1
    if track.frames:
        frames.append(track.frames[-1])

    if not rellenados:
        if sin_rellenar:
            logger.info("Persona %d: %d huecos largos sin rellenar", track.person_id, sin_rellenar)
        return track

    logger.info(
        "Persona %d: %d huecos rellenados, %d sin rellenar",
        track.person_id,
        rellenados,
        sin_rellenar,
    )
    return PoseTrack(
        person_id=track.person_id,
        fps=track.fps,
        keypoint_schema=track.keypoint_schema,
        frames=tuple(frames),
    )
