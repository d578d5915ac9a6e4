"""
Gráficas SVG de posición normalizada y velocidad

Dos paneles apilados: arriba la posición p con las fronteras de cran y la
banda neutra; abajo la velocidad con las guías de ±20 y ±40 °/s. Tenues y
asentimientos se dibujan como cajas translúcidas con ids SVG estables.
"""

import io
import logging
from typing import Optional, Sequence

import matplotlib

matplotlib.use("agg")

import matplotlib.pyplot as plt  # noqa: E402

from epikine.config.settings import DetectorConfig  # noqa: E402
from epikine.core.calibration import NOTCH_BOUNDARIES  # noqa: E402
from epikine.errors import EmptySeriesError, SeriesMismatchError  # noqa: E402
from epikine.schemas import Hold, NodBurst, NormalizedSeries, VelocitySeries  # noqa: E402

logger = logging.getLogger(__name__)

SVG_HASHSALT = "epikine"
HOLD_COLOR = "#d95f02"
NOD_COLOR = "#1b9e77"


def _boxes(ax, events: Sequence, panel: str) -> None:
    cuenta = {"HOLD": 0, "NOD": 0}
    for event in events:
        if not isinstance(event, (Hold, NodBurst)):
            continue
        cuenta[event.kind] += 1
        color = HOLD_COLOR if isinstance(event, Hold) else NOD_COLOR
        caja = ax.axvspan(event.start_s, event.end_s, color=color, alpha=0.2, linewidth=0)
        caja.set_gid(f"{panel}-{event.kind.lower()}-{cuenta[event.kind]}")


def plot_series(
    norm: NormalizedSeries,
    vel: VelocitySeries,
    events: Sequence = (),
    cfg: Optional[DetectorConfig] = None,
    title: Optional[str] = None,
) -> bytes:
    """
    Figura SVG determinista de una serie

    Args:
        norm: Posición normalizada
        vel: Velocidad alineada con norm
        events: Marcadores a dibujar (las bandas de velocidad se ignoran)
        cfg: Umbrales de las guías de velocidad
        title: Título opcional

    Returns:
        Bytes del SVG

    Raises:
        EmptySeriesError: Si la serie está vacía
        SeriesMismatchError: Si las dos series no tienen la misma longitud
    """
    cfg = cfg or DetectorConfig()
    if len(norm) == 0:
        raise EmptySeriesError("No hay muestras que dibujar")
    if len(norm) != len(vel):
        raise SeriesMismatchError("Posición y velocidad tienen longitudes distintas")

    t = norm.times()
    inicio, fin = norm.span()

    with plt.rc_context({"svg.hashsalt": SVG_HASHSALT, "svg.fonttype": "none"}):
        fig, (ax_p, ax_v) = plt.subplots(2, 1, sharex=True, figsize=(10, 6))
        try:
            # Posición
            neutra = ax_p.axhspan(-NOTCH_BOUNDARIES[0], NOTCH_BOUNDARIES[0], color="#bbbbbb", alpha=0.3)
            neutra.set_gid("neutral-band")
            for k, frontera in enumerate(NOTCH_BOUNDARIES, start=1):
                for signo, nombre in ((1, "flx"), (-1, "ext")):
                    linea = ax_p.axhline(signo * frontera, color="#999999", linewidth=0.5, linestyle=":")
                    linea.set_gid(f"notch-{nombre}-{k}")
            _boxes(ax_p, events, "position")
            ax_p.plot(t, norm.values(), color="black", linewidth=1.0, gid="position-line")
            ax_p.set_ylim(-1.05, 1.05)
            ax_p.set_ylabel("p (FLX +, EXT -)")
            if title:
                ax_p.set_title(title)

            # Velocidad
            for umbral, nombre in ((cfg.speed_high, "high"), (cfg.speed_low, "low")):
                for signo, lado in ((1, "pos"), (-1, "neg")):
                    linea = ax_v.axhline(signo * umbral, color="#999999", linewidth=0.8, linestyle="--")
                    linea.set_gid(f"guide-{nombre}-{lado}")
            _boxes(ax_v, events, "velocity")
            ax_v.plot(t, vel.values(), color="#333399", linewidth=1.0, gid="velocity-line")
            ax_v.set_ylabel("v (°/s)")
            ax_v.set_xlabel("t (s)")
            ax_v.set_xlim(inicio, fin)

            fig.tight_layout()
            buffer = io.BytesIO()
            fig.savefig(buffer, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)

    logger.info("Gráfica de %d muestras generada", len(norm))
    return buffer.getvalue()
