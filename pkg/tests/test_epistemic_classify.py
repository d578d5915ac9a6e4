import itertools

import pytest

from epikine.config.settings import ClassifierConfig
from epikine.core.epistemic_classify import (
    ALL_LANGUAGES,
    RULE_HIGH,
    RULE_HOLD,
    RULE_NOD,
    SegmentInterval,
    analyze_segments,
    render_segments_text,
    render_summary_text,
    score_segment,
    summarize_corpus,
)
from epikine.core.synth_oracle import fixture_suite, generate
from epikine.errors import ArgumentError
from epikine.schemas import (
    EpistemicLabel,
    EpistemicSegment,
    Hold,
    NodBurst,
    Notch,
    SegmentSource,
    SpeedBand,
    SpeedLevel,
)


def _nod(inicio, cruza=True, ciclos=3, amplitud=0.3):
    return NodBurst(
        start_s=inicio,
        end_s=inicio + 1.5,
        cycles=ciclos,
        crosses_neutral=cruza,
        max_peak_to_peak_p=amplitud,
        peak_speed_deg_s=60.0,
    )


def _hold(inicio, notch=Notch.FLX_MOYEN, micro=False):
    return Hold(
        start_s=inicio,
        end_s=inicio + 2.5,
        duration_s=2.5,
        median_notch=notch,
        non_neutral=notch != Notch.NEUTRAL,
        micro_oscillation=micro,
    )


def _banda(inicio, fin, nivel):
    stat = {SpeedLevel.HIGH: 55.0, SpeedLevel.MID: 30.0, SpeedLevel.LOW: 8.0}[nivel]
    return SpeedBand(start_s=inicio, end_s=fin, band=nivel, stat_deg_s=stat)


def test_segmento_cierto():
    seg = score_segment(0.0, 5.0, [_nod(1.0), _banda(0.0, 5.0, SpeedLevel.HIGH)])
    assert seg.label == EpistemicLabel.CERT
    assert (seg.cert_score, seg.incert_score) == (2, 0)
    assert seg.source == SegmentSource.PREDICTED
    assert [e.rule for e in seg.evidence] == [RULE_NOD, RULE_HIGH]


def test_segmento_incierto():
    seg = score_segment(0.0, 5.0, [_hold(0.5), _banda(0.0, 5.0, SpeedLevel.LOW)])
    assert seg.label == EpistemicLabel.INCERT
    assert (seg.cert_score, seg.incert_score) == (0, 2)


def test_segmento_vacio_indeterminado():
    seg = score_segment(0.0, 5.0, [])
    assert seg.label == EpistemicLabel.UNDETERMINED
    assert (seg.cert_score, seg.incert_score) == (0, 0)
    assert seg.evidence == ()


def test_empate_indeterminado():
    seg = score_segment(0.0, 6.0, [_nod(0.0), _hold(3.0)])
    assert seg.label == EpistemicLabel.UNDETERMINED
    assert {e.rule for e in seg.evidence} == {RULE_NOD, RULE_HOLD}


def test_reglas_que_no_puntuan():
    eventos = [
        _nod(0.0, cruza=False),
        _nod(2.0, ciclos=1),
        _hold(3.0, notch=Notch.NEUTRAL),
        _banda(0.0, 6.0, SpeedLevel.MID),
    ]
    assert score_segment(0.0, 6.0, eventos).label == EpistemicLabel.UNDETERMINED
    cfg = ClassifierConfig(nod_min_cycles=1)
    assert score_segment(0.0, 6.0, [_nod(2.0, ciclos=1)], cfg).label == EpistemicLabel.CERT


def test_los_eventos_se_asignan_por_punto_medio():
    # Punto medio en 5.75: fuera de [0, 5)
    assert score_segment(0.0, 5.0, [_nod(5.0)]).label == EpistemicLabel.UNDETERMINED
    assert score_segment(5.0, 10.0, [_nod(5.0)]).label == EpistemicLabel.CERT


def _manual(inicio, etiqueta, lengua):
    return EpistemicSegment(
        start_s=inicio, end_s=inicio + 5.0, label=etiqueta, source=SegmentSource.MANUAL, language=lengua
    )


def test_tabla_de_frecuencias():
    pares = []
    for i in range(20):
        inicio = 10.0 * i
        eventos = [_nod(inicio + 1.0)] if i < 15 else []
        pares.append((_manual(inicio, EpistemicLabel.CERT, "FR"), eventos))
    for i in range(20):
        inicio = 500.0 + 10.0 * i
        eventos = [_hold(inicio + 1.0, micro=i < 4)] if i < 10 else []
        pares.append((_manual(inicio, EpistemicLabel.INCERT, "LSF"), eventos))

    resumen = summarize_corpus(pares)
    fr = resumen.cell("FR", EpistemicLabel.CERT)
    assert fr.fraction("nods") == "15/20"
    assert fr.fraction("neutral_nods") == "15/20"
    assert fr.fraction("strong_nods") == "0/20"
    lsf = resumen.cell("LSF", EpistemicLabel.INCERT)
    assert lsf.fraction("non_neutral_holds") == "10/20"
    assert lsf.fraction("micro_holds") == "4/20"
    assert resumen.cell("FR", EpistemicLabel.INCERT) is None

    assert resumen.cell(ALL_LANGUAGES, EpistemicLabel.CERT).total == 20
    assert resumen.cell(ALL_LANGUAGES, EpistemicLabel.INCERT).holds == 10
    assert [(c.language, c.label) for c in resumen.cells] == [
        ("FR", EpistemicLabel.CERT),
        ("LSF", EpistemicLabel.INCERT),
        (ALL_LANGUAGES, EpistemicLabel.CERT),
        (ALL_LANGUAGES, EpistemicLabel.INCERT),
    ]

    texto = render_summary_text(resumen)
    assert "15/20" in texto
    assert texto.splitlines()[0].startswith("lengua")


def test_amplitud_fuerte():
    pares = [(_manual(0.0, EpistemicLabel.CERT, "FR"), [_nod(1.0, amplitud=0.8)])]
    assert summarize_corpus(pares).cell("FR", EpistemicLabel.CERT).strong_nods == 1
    cfg = ClassifierConfig(strong_amplitude_p=0.9)
    assert summarize_corpus(pares, cfg).cell("FR", EpistemicLabel.CERT).strong_nods == 0


def test_resumen_solo_acepta_segmentos_manuales():
    prediccion = score_segment(0.0, 5.0, [])
    with pytest.raises(ArgumentError):
        summarize_corpus([(prediccion, [])])
    sin_lengua = _manual(0.0, EpistemicLabel.CERT, None)
    with pytest.raises(ArgumentError):
        summarize_corpus([(sin_lengua, [])])


@pytest.mark.parametrize(
    "nombre, esperado",
    [("certainty_pattern", EpistemicLabel.CERT), ("uncertainty_pattern", EpistemicLabel.INCERT)],
)
def test_analyze_segments_sobre_patrones(perfil_fr, nombre, esperado):
    spec = fixture_suite()[nombre]
    _, norm, vel, _ = generate(spec, perfil_fr)
    intervalo = SegmentInterval(start_s=0.0, end_s=spec.duration_s, label=esperado, language="FR")
    (analisis,) = analyze_segments([intervalo], norm, vel)
    assert analisis.prediction.label == esperado
    assert analisis.manual().source == SegmentSource.MANUAL
    assert any(isinstance(e, SpeedBand) for e in analisis.events)

    texto = render_segments_text([analisis])
    assert f"manual={esperado.value} pred={esperado.value}" in texto


def test_intervalo_sin_duracion():
    with pytest.raises(ValueError):
        SegmentInterval(start_s=2.0, end_s=2.0)


def test_el_orden_de_los_eventos_no_cambia_el_resultado():
    eventos = [_banda(0.0, 6.0, SpeedLevel.HIGH), _nod(1.0), _hold(2.0), _nod(3.0, cruza=False)]
    referencia = score_segment(0.0, 6.0, eventos)
    for orden in itertools.permutations(eventos):
        assert score_segment(0.0, 6.0, list(orden)) == referencia


_RANGO = {EpistemicLabel.INCERT: -1, EpistemicLabel.UNDETERMINED: 0, EpistemicLabel.CERT: 1}


def _rango(eventos) -> int:
    return _RANGO[score_segment(0.0, 6.0, eventos).label]


def test_la_evidencia_mueve_la_etiqueta_en_un_solo_sentido():
    de_certeza = [_nod(1.0), _banda(0.0, 6.0, SpeedLevel.HIGH)]
    de_incertidumbre = [_hold(0.5), _banda(0.0, 6.0, SpeedLevel.LOW)]
    neutros = [_nod(2.0, cruza=False), _hold(3.0, notch=Notch.NEUTRAL)]
    reserva = de_certeza + de_incertidumbre + neutros
    for n in range(len(reserva) + 1):
        for base in itertools.combinations(reserva, n):
            base = list(base)
            for evento in de_certeza:
                assert _rango(base + [evento]) >= _rango(base)
            for evento in de_incertidumbre:
                assert _rango(base + [evento]) <= _rango(base)
            for evento in neutros:
                assert _rango(base + [evento]) == _rango(base)
