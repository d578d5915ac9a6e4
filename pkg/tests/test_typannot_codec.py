import itertools
import math

import numpy as np
import pytest

from conftest import FPS, serie_normalizada
from epikine.core.typannot_codec import (
    decode,
    encode,
    qualify_records,
    read_records,
    series_to_records,
    side_allowed,
    write_records,
)
from epikine.errors import CodecError, RecordParseError
from epikine.schemas import (
    NECK_FLXEXT,
    Contrast,
    Dof,
    DofId,
    NodBurst,
    Notch,
    ProsodicQualifier,
    SegmentId,
    Side,
    SpeedBand,
    SpeedLevel,
    TypannotRecord,
)


def _registro(**kwargs) -> TypannotRecord:
    datos = dict(segment=SegmentId.COU, dof=NECK_FLXEXT, notch=Notch.FLX_MOYEN, start_s=1.0, end_s=2.5)
    datos.update(kwargs)
    return TypannotRecord(**datos)


def test_forma_canonica():
    registro = _registro(qualifiers=ProsodicQualifier(speed_contrast=Contrast.PLUS, repetitions=4))
    texto = encode(registro)
    assert texto == "COU:FLXEXT=FLX_MOYEN;v+;x4@1.00-2.50"
    assert decode(texto) == registro


@pytest.mark.parametrize(
    "texto",
    [
        "COU:FLXEXT=NEUTRAL@0.00-0.04",
        "TETE:RINREX=REX_BUTEE;a-@12.34-56.78",
        "BUSTE:ABDADD:LEFT=ABD_PETIT;v-;a+;x12@3.10-3.20",
        "EPAULES:RINREX:RIGHT=RIN_GRAND@0.50-1.00",
    ],
)
def test_decode_encode_identidad(texto):
    assert encode(decode(texto)) == texto


def test_lateralidad():
    assert not side_allowed(SegmentId.COU, DofId(dof=Dof.FLXEXT, side=Side.LEFT))
    assert not side_allowed(SegmentId.TETE, DofId(dof=Dof.ABDADD, side=Side.RIGHT))
    assert side_allowed(SegmentId.COU, DofId(dof=Dof.ABDADD, side=Side.LEFT))

    with pytest.raises(CodecError):
        encode(_registro(dof=DofId(dof=Dof.FLXEXT, side=Side.LEFT)))
    with pytest.raises(RecordParseError) as info:
        decode("COU:FLXEXT:LEFT=FLX_MOYEN@1.00-2.50")
    assert info.value.column == 12


@pytest.mark.parametrize(
    "texto, columna",
    [
        ("COU:FLXEXT=FLX_MOYEN@2.50-1.00", 22),
        ("CUELLO:FLXEXT=FLX_MOYEN@1.00-2.50", 1),
        ("COU:FLXEXT=ABD_MOYEN@1.00-2.50", 12),
        ("COU:FLXEXT=FLX_MOYEN;a+;v+@1.00-2.50", 25),
        ("COU:FLXEXT=FLX_MOYEN;x0@1.00-2.50", 23),
        ("COU:FLXEXT=FLX_MOYEN@1.0-2.50", 24),
        ("COU:FLXEXT=FLX_MOYEN@01.00-2.50", 22),
        ("COU:FLXEXT=FLX_MOYEN@1.00-2.50 ", 31),
        ("COU:FLXEXT=FLX_MOYEN", 21),
    ],
)
def test_errores_con_columna(texto, columna):
    with pytest.raises(RecordParseError) as info:
        decode(texto)
    assert info.value.column == columna
    assert f"columna {columna}" in str(info.value)


def test_barrido_completo_del_espacio_de_registros():
    cualificadores = [
        ProsodicQualifier(speed_contrast=v, amplitude_contrast=a, repetitions=x)
        for v, a, x in itertools.product(Contrast, Contrast, (None, 1, 4, 12))
    ]
    intervalos = [(0.0, 0.04), (12.5, 13.75)]
    casos = 0
    for segment, dof, side, notch, q, (inicio, fin) in itertools.product(
        SegmentId, Dof, Side, Notch, cualificadores, intervalos
    ):
        dof_id = DofId(dof=dof, side=side)
        if not side_allowed(segment, dof_id):
            continue
        registro = TypannotRecord(
            segment=segment, dof=dof_id, notch=notch, qualifiers=q, start_s=inicio, end_s=fin
        )
        assert decode(encode(registro)) == registro
        casos += 1
    assert casos >= 10_000


def test_tiempos_cuantizados_a_centesimas():
    registro = _registro(start_s=1.004, end_s=2.496)
    assert (registro.start_s, registro.end_s) == (1.0, 2.5)


def test_archivo_de_registros():
    registros = [_registro(), _registro(notch=Notch.EXT_BUTEE, start_s=2.5, end_s=3.0)]
    texto = write_records(registros)
    assert texto.endswith("\n")
    assert texto.count("\n") == 2
    assert read_records(texto) == registros

    with pytest.raises(RecordParseError, match="Línea 2"):
        read_records("COU:FLXEXT=NEUTRAL@0.00-1.00\nCOU:FLXEXT=XXX@1.00-2.00\n")


def test_series_to_records_funde_tramos_cortos():
    ps = [0.0] * 10 + [0.3] + [0.0] * 10
    registros = series_to_records(serie_normalizada(ps))
    assert len(registros) == 1
    assert registros[0].notch == Notch.NEUTRAL
    assert (registros[0].start_s, registros[0].end_s) == (0.0, 0.84)


def test_series_to_records_tramos_largos():
    ps = [0.0] * 10 + [0.5] * 10 + [-0.9] * 10
    registros = series_to_records(serie_normalizada(ps))
    assert [r.notch for r in registros] == [Notch.NEUTRAL, Notch.FLX_MOYEN, Notch.EXT_BUTEE]
    assert [(r.start_s, r.end_s) for r in registros] == [(0.0, 0.4), (0.4, 0.8), (0.8, 1.2)]


def test_series_to_records_vecino_mas_cercano():
    # El tramo corto FLX_PETIT se une a NEUTRAL (distancia 1) y no a FLX_GRAND (distancia 2)
    ps = [0.0] * 10 + [0.2] * 2 + [0.7] * 10
    registros = series_to_records(serie_normalizada(ps))
    assert [r.notch for r in registros] == [Notch.NEUTRAL, Notch.FLX_GRAND]
    assert registros[0].end_s == pytest.approx(0.48)


@pytest.mark.parametrize("fps, muestras", [(300.0, 1), (1000.0, 4)])
def test_series_to_records_tramo_unico_mas_corto_que_una_centesima(fps, muestras):
    registros = series_to_records(serie_normalizada([0.3] * muestras, fps=fps))
    assert len(registros) == 1
    assert registros[0].notch == Notch.FLX_PETIT
    assert (registros[0].start_s, registros[0].end_s) == (0.0, 0.01)


def _centro(notch: Notch) -> float:
    grado = int(notch)
    return math.copysign(min(0.25 * abs(grado), 0.95), grado) if grado else 0.0


@pytest.mark.parametrize("semilla", range(5))
def test_series_to_records_cubre_la_serie_y_conserva_el_cran(semilla):
    rng = np.random.default_rng(semilla)
    crans = list(Notch)
    ps: list[float] = []
    anterior = None
    for _ in range(8):
        opciones = [n for n in crans if n != anterior]
        notch = opciones[int(rng.integers(len(opciones)))]
        tramo = [_centro(notch)] * int(rng.integers(8, 25))
        if rng.random() < 0.5:
            # Pico de una muestra dentro del tramo
            otros = [n for n in crans if n != notch]
            tramo[3] = _centro(otros[int(rng.integers(len(otros)))])
        ps.extend(tramo)
        anterior = notch
    serie = serie_normalizada(ps)
    registros = series_to_records(serie)

    inicio, fin = serie.span()
    assert registros[0].start_s == pytest.approx(inicio)
    assert registros[-1].end_s == pytest.approx(fin)
    for previo, siguiente in zip(registros, registros[1:]):
        assert previo.end_s == siguiente.start_s
        assert previo.notch != siguiente.notch
    for registro in registros:
        medio = (registro.start_s + registro.end_s) / 2
        assert serie.samples[int(math.floor(medio * FPS + 1e-6))].notch == registro.notch


def test_series_to_records_min_run_negativo():
    with pytest.raises(CodecError):
        series_to_records(serie_normalizada([0.0, 0.0]), min_run_s=-1.0)


def test_qualify_records():
    registros = [_registro(start_s=0.0, end_s=2.0), _registro(start_s=2.0, end_s=4.0)]
    eventos = [
        NodBurst(
            start_s=0.0,
            end_s=2.0,
            cycles=3,
            crosses_neutral=True,
            max_peak_to_peak_p=0.7,
            peak_speed_deg_s=80.0,
        ),
        SpeedBand(start_s=0.0, end_s=4.0, band=SpeedLevel.HIGH, stat_deg_s=55.0),
    ]
    primero, segundo = qualify_records(registros, eventos)
    assert encode(primero) == "COU:FLXEXT=FLX_MOYEN;v+;a+;x3@0.00-2.00"
    assert encode(segundo) == "COU:FLXEXT=FLX_MOYEN;v+@2.00-4.00"
