import json

import pytest

from conftest import poses_desde_angulos
from epikine.core.annotation_io import read_eaf, tier_by_id, write_eaf
from epikine.core.calibration import save_profile
from epikine.core.synth_oracle import fixture_suite, generate
from epikine.main import build_parser, main
from epikine.schemas import Annotation, CalibrationProfile, Tier


def _nivel(tier_id, *anotaciones):
    return Tier(
        tier_id=tier_id,
        annotations=tuple(Annotation(start_ms=s, end_ms=e, value=v) for s, e, v in anotaciones),
    )


@pytest.fixture
def sesion_de_calibracion(tmp_path):
    """Tres mesetas de 1 s: reposo 104°, butée FLX 140°, butée EXT 88°"""
    poses = tmp_path / "sujeto.json"
    poses.write_bytes(poses_desde_angulos([104.0] * 25 + [140.0] * 25 + [88.0] * 25))
    eaf = tmp_path / "calib.eaf"
    eaf.write_bytes(
        write_eaf([_nivel("CALIB", (400, 600, "REST"), (1400, 1600, "FLX_LIMIT"), (2400, 2600, "EXT_LIMIT"))])
    )
    return poses, eaf


@pytest.fixture
def sesion_cierta(tmp_path):
    """Asentimientos que cruzan la posición neutra seguidos de una rampa rápida"""
    perfil = CalibrationProfile(subject_id="sujeto", rest_deg=104.0, flx_limit_deg=140.0, ext_limit_deg=88.0)
    raw, _, _, _ = generate(fixture_suite()["certainty_pattern"], perfil)
    poses = tmp_path / "sujeto.json"
    poses.write_bytes(poses_desde_angulos(raw.values()))
    perfil_json = tmp_path / "profile.json"
    perfil_json.write_text(save_profile(perfil))
    eaf = tmp_path / "manual.eaf"
    eaf.write_bytes(write_eaf([_nivel("EPISTEME", (0, 3000, "CERT"))]))
    return poses, perfil_json, eaf


def test_subcomando_obligatorio():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_calibrate(tmp_path, capsys, sesion_de_calibracion):
    poses, eaf = sesion_de_calibracion
    salida = tmp_path / "salida"
    codigo = main(["calibrate", "--pose", str(poses), "--eaf", str(eaf), "--out", str(salida)])
    assert codigo == 0

    perfil = json.loads((salida / "profile.json").read_text())
    assert perfil["subject_id"] == "sujeto"
    assert perfil["rest_deg"] == pytest.approx(104.0)
    assert perfil["flx_limit_deg"] == pytest.approx(140.0)
    assert perfil["ext_limit_deg"] == pytest.approx(88.0)

    impreso = capsys.readouterr().out
    assert impreso.startswith("Sujeto sujeto")
    assert "FLX_BUTEE" in impreso


def test_calibrate_sin_hito(tmp_path, capsys, sesion_de_calibracion):
    poses, _ = sesion_de_calibracion
    eaf = tmp_path / "incompleto.eaf"
    eaf.write_bytes(write_eaf([_nivel("CALIB", (400, 600, "REST"), (1400, 1600, "FLX_LIMIT"))]))
    codigo = main(["calibrate", "--pose", str(poses), "--eaf", str(eaf), "--out", str(tmp_path)])
    assert codigo == 3
    error = capsys.readouterr().err
    assert error.startswith("[calibration]")
    assert "EXT_LIMIT" in error
    assert not (tmp_path / "profile.json").exists()


def test_archivo_de_poses_inexistente(tmp_path, capsys):
    eaf = tmp_path / "calib.eaf"
    eaf.write_bytes(write_eaf([]))
    codigo = main(["calibrate", "--pose", str(tmp_path / "no.json"), "--eaf", str(eaf)])
    assert codigo == 2
    assert "no.json" in capsys.readouterr().err


def _analizar(poses, perfil, eaf, salida):
    return main(
        ["analyze", "--pose", str(poses), "--profile", str(perfil), "--eaf", str(eaf), "--out", str(salida)]
    )


def test_analyze(tmp_path, capsys, sesion_cierta):
    poses, perfil, eaf = sesion_cierta
    assert _analizar(poses, perfil, eaf, tmp_path / "a") == 0
    impreso = capsys.readouterr().out
    assert "manual=CERT pred=CERT" in impreso
    assert "FR      CERT" in impreso

    for nombre in ("series.csv", "events.csv", "records.txt", "predictions.eaf", "summary.txt", "summary.csv"):
        assert (tmp_path / "a" / nombre).is_file(), nombre

    doc = read_eaf((tmp_path / "a" / "predictions.eaf").read_bytes())
    assert [a.value for a in tier_by_id(doc, "PREDICTION").annotations] == ["CERT"]
    assert tier_by_id(doc, "EPISTEME") is not None
    assert tier_by_id(doc, "MARK_NOD").annotations
    notches = tier_by_id(doc, "NOTCH_COU_FLXEXT")
    assert all(a.value.startswith("COU:FLXEXT=") for a in notches.annotations)

    # Dos ejecuciones, archivos idénticos
    assert _analizar(poses, perfil, eaf, tmp_path / "b") == 0
    for nombre in ("series.csv", "events.csv", "records.txt", "predictions.eaf", "summary.txt", "summary.csv"):
        assert (tmp_path / "a" / nombre).read_bytes() == (tmp_path / "b" / nombre).read_bytes(), nombre


def test_analyze_sin_eaf_usa_el_archivo_completo(tmp_path, capsys, sesion_cierta):
    poses, perfil, _ = sesion_cierta
    codigo = main(["analyze", "--pose", str(poses), "--profile", str(perfil), "--out", str(tmp_path / "c")])
    assert codigo == 0
    assert "manual=- pred=CERT" in capsys.readouterr().out


def test_analyze_perfil_de_otro_sujeto(tmp_path, capsys, sesion_cierta):
    poses, _, eaf = sesion_cierta
    otro = tmp_path / "otro.json"
    otro.write_text(
        save_profile(CalibrationProfile(subject_id="otro", rest_deg=97.0, flx_limit_deg=137.0, ext_limit_deg=53.0))
    )
    assert _analizar(poses, otro, eaf, tmp_path / "d") == 3
    assert capsys.readouterr().err.startswith("[calibration]")


def test_plot_determinista(tmp_path, capsys, sesion_cierta):
    poses, perfil, eaf = sesion_cierta
    assert _analizar(poses, perfil, eaf, tmp_path / "a") == 0
    svgs = []
    for nombre in ("p1", "p2"):
        codigo = main(
            [
                "plot",
                "--series",
                str(tmp_path / "a" / "series.csv"),
                "--events",
                str(tmp_path / "a" / "events.csv"),
                "--profile",
                str(perfil),
                "--out",
                str(tmp_path / nombre),
            ]
        )
        assert codigo == 0
        svgs.append((tmp_path / nombre / "plot.svg").read_bytes())
    assert svgs[0] == svgs[1]
    assert b'id="velocity-nod-1"' in svgs[0]
    assert str(tmp_path / "p2" / "plot.svg") in capsys.readouterr().out


def test_agree(tmp_path, capsys):
    nivel = _nivel("EPISTEME", (0, 1500, "CERT"), (1500, 4000, "INCERT"))
    a, b = tmp_path / "a.eaf", tmp_path / "b.eaf"
    a.write_bytes(write_eaf([nivel]))
    b.write_bytes(write_eaf([nivel]))
    assert main(["agree", str(a), str(b)]) == 0
    assert "kappa por fotograma: 1.0000" in capsys.readouterr().out


def test_agree_nivel_ausente(tmp_path, capsys):
    a = tmp_path / "a.eaf"
    a.write_bytes(write_eaf([_nivel("OTRO", (0, 1000, "CERT"))]))
    assert main(["agree", str(a), str(a)]) == 2
    assert capsys.readouterr().err.startswith("[annotation_io]")


def test_synth_test(tmp_path, capsys):
    assert main(["synth-test", "--out", str(tmp_path)]) == 0
    impreso = capsys.readouterr().out
    assert "TOTAL" in impreso
    assert (tmp_path / "suite.txt").read_text() == impreso


def test_synth_test_con_trayectoria_propia(tmp_path, capsys):
    spec = tmp_path / "tenue.json"
    spec.write_text('{"duration_s": 3.0, "pieces": [{"kind": "HOLD", "p": -0.5, "duration_s": 3.0}]}')
    assert main(["synth-test", str(spec)]) == 0
    assert "tenue" in capsys.readouterr().out

    spec.write_text('{"duration_s": 4.0, "pieces": [{"kind": "HOLD", "p": -0.5, "duration_s": 3.0}]}')
    assert main(["synth-test", str(spec)]) == 2
    assert capsys.readouterr().err.startswith("[synth_oracle]")
