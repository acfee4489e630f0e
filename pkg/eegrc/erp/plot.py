"""脑区平均波形的 SVG 折线图。"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import matplotlib as mpl
from matplotlib.figure import Figure

from eegrc.config.schema import RoiMap, TimeWindows
from eegrc.erp.waveform import region_rows
from eegrc.utils.types import Region, WordType


if TYPE_CHECKING:
    from collections.abc import Sequence

    from eegrc.erp.waveform import ConditionWaveform


COLORS = {
    WordType.ANSWER: '#d62728',
    WordType.SEMANTIC_RELATED: '#1f77b4',
    WordType.ORDINARY: '#7f7f7f',
}


def plot_roi_waveforms(
    waveforms: Sequence[ConditionWaveform],
    region: Region | str,
    path: str | Path,
    roi_map: RoiMap | None = None,
    windows: TimeWindows | None = None,
) -> Path:
    """画出某脑区三类词的平均波形，并以阴影标出成分时间窗。

    输出为确定性的 SVG（固定 hashsalt，不写日期）。

    Args:
        waveforms: 条件平均波形。
        region: 脑区。
        path: 输出文件。
        roi_map: 脑区划分。
        windows: 成分时间窗。

    Returns:
        输出路径。
    """
    roi = roi_map or RoiMap.default()
    win = windows or TimeWindows()
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with mpl.rc_context({'svg.hashsalt': 'eegrc', 'svg.fonttype': 'none'}):
        fig = Figure(figsize=(8, 4.5))
        ax = fig.add_subplot()
        for name, (start, end) in win.as_dict().items():
            ax.axvspan(start, end, color='#eeeeee' if name in ('n100', 'n400') else '#f8f8f8', zorder=0)
            ax.text((start + end) / 2, 1.0, name.upper(), transform=ax.get_xaxis_transform(), ha='center', va='bottom', fontsize=8)
        for w in waveforms:
            trace = w.data[region_rows(w, region, roi)].mean(axis=0)
            ax.plot(w.times_ms, trace, color=COLORS.get(w.condition, 'k'), lw=1.2, label=f'{w.condition} (n={w.n_epochs})')
        ax.axhline(0.0, color='k', lw=0.5)
        ax.axvline(0.0, color='k', lw=0.5, ls='--')
        ax.set_xlabel('time (ms)')
        ax.set_ylabel('voltage (µV)')
        ax.set_title(f'{Region(region).value} ROI', pad=14)
        ax.legend(loc='lower right', fontsize=8, frameon=False)
        fig.tight_layout()
        fig.savefig(out, format='svg', metadata={'Date': None})
    return out
