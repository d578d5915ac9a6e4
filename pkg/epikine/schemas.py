"""
Modelos Pydantic compartidos por los módulos de epikine
"""

import math
from enum import Enum, IntEnum
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Tolerancia para comprobar el muestreo uniforme (segundos)
SAMPLING_TOLERANCE_S = 1e-5


# Enumeraciones
class KeypointSchemaName(str, Enum):
    COCO17 = "COCO17"
    HALPE26 = "HALPE26"


class Estimator(str, Enum):
    SAGITTAL_PROXY = "SAGITTAL_PROXY"
    INTERIOR_ANGLE = "INTERIOR_ANGLE"


class SegmentId(str, Enum):
    COU = "COU"
    TETE = "TETE"
    EPAULES = "EPAULES"
    BUSTE = "BUSTE"


class Dof(str, Enum):
    FLXEXT = "FLXEXT"
    ABDADD = "ABDADD"
    RINREX = "RINREX"


class Side(str, Enum):
    LEFT = "LEFT"
    RIGHT = "RIGHT"
    NONE = "NONE"


class Quality(str, Enum):
    GOOD = "GOOD"
    LOW_CONFIDENCE = "LOW_CONFIDENCE"
    INTERPOLATED = "INTERPOLATED"


class Notch(IntEnum):
    """Cran Typannot: el valor es el grado con signo (+ flexión, - extensión)"""

    EXT_BUTEE = -4
    EXT_GRAND = -3
    EXT_MOYEN = -2
    EXT_PETIT = -1
    NEUTRAL = 0
    FLX_PETIT = 1
    FLX_MOYEN = 2
    FLX_GRAND = 3
    FLX_BUTEE = 4

    @property
    def grade(self) -> int:
        return abs(int(self))


class Landmark(str, Enum):
    REST = "REST"
    FLX_LIMIT = "FLX_LIMIT"
    EXT_LIMIT = "EXT_LIMIT"


class SpeedLevel(str, Enum):
    HIGH = "HIGH"
    MID = "MID"
    LOW = "LOW"


class Contrast(str, Enum):
    PLUS = "PLUS"
    MINUS = "MINUS"
    NONE = "NONE"


class EpistemicLabel(str, Enum):
    CERT = "CERT"
    INCERT = "INCERT"
    UNDETERMINED = "UNDETERMINED"


class SegmentSource(str, Enum):
    MANUAL = "MANUAL"
    PREDICTED = "PREDICTED"


# Modelos de poses
Point = tuple[float, float, float]
Box = tuple[float, float, float, float]


class KeypointSchema(BaseModel):
    """Esquema de puntos clave de la herramienta de estimación de poses"""

    model_config = ConfigDict(frozen=True)

    name: KeypointSchemaName
    keypoint_count: int
    indices: dict[str, int]

    @model_validator(mode="after")
    def validar_indices(self):
        valores = list(self.indices.values())
        if len(set(valores)) != len(valores):
            raise ValueError("Cada rol del esquema debe tener un índice distinto")
        for rol, indice in self.indices.items():
            if not 0 <= indice < self.keypoint_count:
                raise ValueError(
                    f"El índice {indice} de '{rol}' está fuera del esquema "
                    f"({self.keypoint_count} puntos)"
                )
        return self

    def index(self, role: str) -> int:
        return self.indices[role]

    def has(self, role: str) -> bool:
        return role in self.indices

    @classmethod
    def for_name(cls, name: KeypointSchemaName) -> "KeypointSchema":
        return HALPE26 if KeypointSchemaName(name) == KeypointSchemaName.HALPE26 else COCO17


_COCO_ROLES = {
    "nose": 0,
    "left_ear": 3,
    "right_ear": 4,
    "left_shoulder": 5,
    "right_shoulder": 6,
    "left_hip": 11,
    "right_hip": 12,
}

COCO17 = KeypointSchema(
    name=KeypointSchemaName.COCO17, keypoint_count=17, indices=_COCO_ROLES
)
HALPE26 = KeypointSchema(
    name=KeypointSchemaName.HALPE26,
    keypoint_count=26,
    indices={**_COCO_ROLES, "head": 17, "neck": 18, "mid_hip": 19},
)


class KeypointFrame(BaseModel):
    model_config = ConfigDict(frozen=True)

    frame_index: int = Field(ge=0)
    timestamp_s: float = Field(ge=0)
    points: tuple[Point, ...]
    person_id: int
    bbox: Box
    score: float = 0.0
    interpolated: bool = False

    @field_validator("points")
    @classmethod
    def validar_confianzas(cls, v):
        for x, y, c in v:
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"Confianza fuera de [0, 1]: {c}")
        return v

    @property
    def bbox_center(self) -> tuple[float, float]:
        x, y, w, h = self.bbox
        return x + w / 2.0, y + h / 2.0

    @property
    def bbox_area(self) -> float:
        return self.bbox[2] * self.bbox[3]


class PoseTrack(BaseModel):
    """Trayectoria de una persona: fotogramas ordenados con el mismo esquema"""

    model_config = ConfigDict(frozen=True)

    person_id: int
    fps: float = Field(gt=0)
    keypoint_schema: KeypointSchema
    frames: tuple[KeypointFrame, ...]

    @model_validator(mode="after")
    def validar_fotogramas(self):
        anterior = -1
        for frame in self.frames:
            if frame.frame_index <= anterior:
                raise ValueError("Los índices de fotograma deben ser estrictamente crecientes")
            if frame.person_id != self.person_id:
                raise ValueError(
                    f"El fotograma {frame.frame_index} pertenece a otra persona "
                    f"({frame.person_id} != {self.person_id})"
                )
            if len(frame.points) != self.keypoint_schema.keypoint_count:
                raise ValueError(
                    f"El fotograma {frame.frame_index} tiene {len(frame.points)} puntos; "
                    f"el esquema {self.keypoint_schema.name.value} exige {self.keypoint_schema.keypoint_count}"
                )
            anterior = frame.frame_index
        return self


class DetectionRegion(BaseModel):
    """Cuadro de detección alrededor del locutor (píxeles)"""

    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    w: float = Field(gt=0)
    h: float = Field(gt=0)

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h

    @classmethod
    def parse(cls, text: str) -> "DetectionRegion":
        """Crear una región a partir del texto 'x,y,w,h'"""
        partes = [p.strip() for p in text.split(",")]
        if len(partes) != 4:
            raise ValueError("La región debe tener el formato x,y,w,h")
        x, y, w, h = (float(p) for p in partes)
        return cls(x=x, y=y, w=w, h=h)


# Series temporales
class DofId(BaseModel):
    model_config = ConfigDict(frozen=True)

    dof: Dof
    side: Side = Side.NONE

    def __str__(self) -> str:
        if self.side == Side.NONE:
            return self.dof.value
        return f"{self.dof.value}:{self.side.value}"


NECK_FLXEXT = DofId(dof=Dof.FLXEXT)


class AngleSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_s: float = Field(ge=0)
    theta_deg: float
    quality: Quality = Quality.GOOD

    @field_validator("theta_deg")
    @classmethod
    def validar_finito(cls, v):
        if not math.isfinite(v):
            raise ValueError("El ángulo debe ser finito")
        return v


class VelocitySample(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_s: float = Field(ge=0)
    v_deg_s: float
    quality: Quality = Quality.GOOD


class NormalizedSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_s: float = Field(ge=0)
    p: float = Field(ge=-1.0, le=1.0)
    notch: Notch
    quality: Quality = Quality.GOOD


class _SeriesBase(BaseModel):
    """Contenedor común: muestras equiespaciadas a 1/fps"""

    model_config = ConfigDict(frozen=True)

    subject_id: str
    segment: SegmentId = SegmentId.COU
    dof: DofId = NECK_FLXEXT
    fps: float = Field(gt=0)

    @model_validator(mode="after")
    def validar_muestreo(self):
        tiempos = [s.t_s for s in self.samples]
        paso = 1.0 / self.fps
        for a, b in zip(tiempos, tiempos[1:]):
            if b <= a:
                raise ValueError("Las marcas de tiempo deben ser estrictamente crecientes")
            if abs((b - a) - paso) > SAMPLING_TOLERANCE_S:
                raise ValueError(
                    f"Muestreo no uniforme entre {a:.6f} s y {b:.6f} s (paso esperado {paso:.6f} s)"
                )
        return self

    def __len__(self) -> int:
        return len(self.samples)

    def times(self) -> np.ndarray:
        return np.array([s.t_s for s in self.samples], dtype=float)

    def qualities(self) -> list[Quality]:
        return [s.quality for s in self.samples]

    def span(self) -> tuple[float, float]:
        """Intervalo cubierto: del primer instante al final del último fotograma"""
        if not self.samples:
            return 0.0, 0.0
        return self.samples[0].t_s, self.samples[-1].t_s + 1.0 / self.fps

    def same_axis(self, other: "_SeriesBase") -> bool:
        return self.segment == other.segment and self.dof == other.dof


class AngleSeries(_SeriesBase):
    samples: tuple[AngleSample, ...]

    def values(self) -> np.ndarray:
        return np.array([s.theta_deg for s in self.samples], dtype=float)


class VelocitySeries(_SeriesBase):
    samples: tuple[VelocitySample, ...]

    def values(self) -> np.ndarray:
        return np.array([s.v_deg_s for s in self.samples], dtype=float)


class NormalizedSeries(_SeriesBase):
    samples: tuple[NormalizedSample, ...]

    def values(self) -> np.ndarray:
        return np.array([s.p for s in self.samples], dtype=float)

    def notches(self) -> list[Notch]:
        return [s.notch for s in self.samples]


# Calibración
class CalibrationProfile(BaseModel):
    """Perfil por sujeto y DDL: reposo y butées articulares en grados brutos"""

    model_config = ConfigDict(frozen=True)

    subject_id: str
    segment: SegmentId = SegmentId.COU
    dof: DofId = NECK_FLXEXT
    rest_deg: float
    flx_limit_deg: float
    ext_limit_deg: float

    @model_validator(mode="after")
    def validar_orden(self):
        if self.flx_limit_deg == self.ext_limit_deg:
            raise ValueError("Las butées de flexión y extensión deben ser distintas")
        bajo = min(self.flx_limit_deg, self.ext_limit_deg)
        alto = max(self.flx_limit_deg, self.ext_limit_deg)
        if not bajo < self.rest_deg < alto:
            raise ValueError(
                f"El reposo ({self.rest_deg}°) debe estar estrictamente entre las butées "
                f"({self.ext_limit_deg}° y {self.flx_limit_deg}°)"
            )
        return self

    @property
    def orientation(self) -> int:
        """+1 si la flexión aumenta los grados brutos, -1 si los disminuye"""
        return 1 if self.flx_limit_deg > self.rest_deg else -1


# Eventos marcadores
class _EventBase(BaseModel):
    model_config = ConfigDict(frozen=True)

    start_s: float
    end_s: float

    @model_validator(mode="after")
    def validar_intervalo(self):
        if not self.start_s < self.end_s:
            raise ValueError(f"Intervalo inválido: {self.start_s} >= {self.end_s}")
        return self

    @property
    def midpoint(self) -> float:
        return (self.start_s + self.end_s) / 2.0

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s


class Hold(_EventBase):
    kind: Literal["HOLD"] = "HOLD"
    duration_s: float = Field(gt=0)
    median_notch: Notch
    non_neutral: bool
    micro_oscillation: bool = False


class NodBurst(_EventBase):
    kind: Literal["NOD"] = "NOD"
    cycles: int = Field(ge=1)
    crosses_neutral: bool
    max_peak_to_peak_p: float = Field(ge=0)
    peak_speed_deg_s: float = Field(ge=0)


class SpeedBand(_EventBase):
    kind: Literal["SPEED"] = "SPEED"
    band: SpeedLevel
    stat_deg_s: float = Field(ge=0)
    peak_deg_s: float = Field(default=0.0, ge=0)


MarkerEvent = Annotated[Union[Hold, NodBurst, SpeedBand], Field(discriminator="kind")]

# Orden estable entre tipos con el mismo inicio
KIND_ORDER = {"HOLD": 0, "NOD": 1, "SPEED": 2}


# Transcripción Typannot
class ProsodicQualifier(BaseModel):
    model_config = ConfigDict(frozen=True)

    speed_contrast: Contrast = Contrast.NONE
    amplitude_contrast: Contrast = Contrast.NONE
    repetitions: Optional[int] = Field(default=None, ge=1)


class TypannotRecord(BaseModel):
    """Registro de transcripción: segmento, DDL, cran y cualificadores"""

    model_config = ConfigDict(frozen=True)

    segment: SegmentId
    dof: DofId
    notch: Notch
    qualifiers: ProsodicQualifier = ProsodicQualifier()
    start_s: float = Field(ge=0)
    end_s: float

    @field_validator("start_s", "end_s")
    @classmethod
    def cuantizar_centesimas(cls, v):
        # La forma canónica escribe centésimas de segundo
        return round(float(v), 2)

    @model_validator(mode="after")
    def validar_intervalo(self):
        if not self.start_s < self.end_s:
            raise ValueError(f"Intervalo inválido: {self.start_s:.2f} >= {self.end_s:.2f}")
        return self


# Anotaciones ELAN
class Annotation(BaseModel):
    model_config = ConfigDict(frozen=True)

    start_ms: int = Field(ge=0)
    end_ms: int
    value: str

    @model_validator(mode="after")
    def validar_intervalo(self):
        if not self.start_ms < self.end_ms:
            raise ValueError(f"Anotación vacía o invertida: {self.start_ms}-{self.end_ms} ms")
        return self


class Tier(BaseModel):
    model_config = ConfigDict(frozen=True)

    tier_id: str
    annotations: tuple[Annotation, ...] = ()


class AgreementReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    frame_kappa: float = Field(ge=-1.0, le=1.0)
    overlap_ratio: float = Field(ge=0.0, le=1.0)
    observed_agreement: float
    chance_agreement: float
    frame_count: int
    confusion: dict[str, dict[str, int]]


# Segmentos epistémicos
class Evidence(BaseModel):
    model_config = ConfigDict(frozen=True)

    event: MarkerEvent
    rule: str


class EpistemicSegment(BaseModel):
    model_config = ConfigDict(frozen=True)

    start_s: float
    end_s: float
    label: EpistemicLabel
    source: SegmentSource
    evidence: tuple[Evidence, ...] = ()
    cert_score: int = Field(default=0, ge=0)
    incert_score: int = Field(default=0, ge=0)
    language: Optional[str] = None

    @model_validator(mode="after")
    def validar_etiqueta(self):
        if not self.start_s < self.end_s:
            raise ValueError("El segmento debe tener duración positiva")
        if self.source == SegmentSource.MANUAL:
            if self.evidence:
                raise ValueError("Un segmento manual no lleva evidencias")
            return self
        if self.cert_score > self.incert_score:
            esperado = EpistemicLabel.CERT
        elif self.incert_score > self.cert_score:
            esperado = EpistemicLabel.INCERT
        else:
            esperado = EpistemicLabel.UNDETERMINED
        if self.label != esperado:
            raise ValueError(
                f"Etiqueta {self.label.value} incoherente con las puntuaciones "
                f"({self.cert_score}, {self.incert_score})"
            )
        return self

    @property
    def midpoint(self) -> float:
        return (self.start_s + self.end_s) / 2.0
