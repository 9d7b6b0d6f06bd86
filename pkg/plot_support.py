"""
tol_t / diff_t figures from a sweep CSV, written as deterministic SVG.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from serialization_support import SweepTable, read_sweep_csv  # noqa: E402

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-16
SVG_SALT = 'netrecon'


def _region_spans(table: SweepTable) -> List[Tuple[float, float]]:
    spans = []
    current: Optional[int] = None
    start = None
    for t, label in list(zip(table.t, table.zero_region)) + [(None, None)]:
        if label != current:
            if current is not None:
                spans.append((start, previous))
            current, start = label, t
        previous = t
    return spans


def plot_sweep(csv_path: Path, svg_path: Path, title: Optional[str] = None) -> Path:
    """diff_t always, tol_t when present, zero regions shaded"""
    table = read_sweep_csv(csv_path)
    plt.rcParams['svg.hashsalt'] = SVG_SALT
    step = float(np.median(np.diff(table.t))) if len(table.t) > 1 else 0.0

    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(table.t, np.maximum(table.diff, LOG_FLOOR), 'o-', markersize=2, linewidth=1, label='diff_t')
    if table.tol is not None:
        ax.plot(table.t, np.maximum(table.tol, LOG_FLOOR), 's-', markersize=2, linewidth=1, label='tol_t')
    for number, (start, end) in enumerate(_region_spans(table), start=1):
        ax.axvspan(start - step / 2, end + step / 2, color='tab:green', alpha=0.15,
                   label='zero region' if number == 1 else None)
    ax.set_yscale('log')
    ax.set_xlabel('t')
    ax.set_ylabel('Frobenius error')
    ax.set_title(title or 'Penalty sweep')
    ax.grid(True, linestyle='--', alpha=0.6)
    ax.legend()
    fig.tight_layout()

    svg_path = Path(svg_path)
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(svg_path, format='svg', metadata={'Date': None})
    plt.close(fig)
    logger.info("wrote %s", svg_path)
    return svg_path
