"""Static SVG reports: model x sequence heatmaps and mean +/- SEM bar charts."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

from .stats import ALL, ANY, Summary

_CELL_W, _CELL_H = 56, 22
_LEFT, _TOP = 110, 90


def _svg(width, height, body) -> str:
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n'
            + "\n".join(body) + "\n</svg>\n")


def _color(t: float) -> str:
    # white -> dark blue
    t = min(max(t, 0.0), 1.0)
    r = int(round(247 - t * (247 - 8)))
    g = int(round(251 - t * (251 - 48)))
    b = int(round(255 - t * (255 - 107)))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(summary: Summary, metric: str, frame_type: str = ALL) -> str:
    """Mean score per (sequence row, model column); empty cells are grey."""
    models = summary.models
    seqs = summary.sequences
    cells = {(m, s): summary.get((m, s, metric, frame_type)) for m in models for s in seqs}
    means = [c.mean for c in cells.values() if c is not None and not c.empty]
    lo, hi = (min(means), max(means)) if means else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    width = _LEFT + _CELL_W * len(models) + 20
    height = _TOP + _CELL_H * len(seqs) + 20
    body = [f'<text x="10" y="20" font-size="14">{escape(metric)} ({escape(frame_type)} frames)</text>']
    for j, m in enumerate(models):
        x = _LEFT + j * _CELL_W + _CELL_W / 2
        body.append(f'<text x="{x:.1f}" y="{_TOP - 8}" text-anchor="start" '
                    f'transform="rotate(-45 {x:.1f} {_TOP - 8})">{escape(m)}</text>')
    for i, s in enumerate(seqs):
        y = _TOP + i * _CELL_H
        body.append(f'<text x="{_LEFT - 6}" y="{y + 15}" text-anchor="end">{escape(s)}</text>')
        for j, m in enumerate(models):
            x = _LEFT + j * _CELL_W
            c = cells[(m, s)]
            if c is None or c.empty:
                fill, label, ink = "#d9d9d9", "", "#000"
            else:
                t = (c.mean - lo) / span
                fill, label, ink = _color(t), f"{c.mean:.3f}", "#fff" if t > 0.55 else "#000"
            body.append(f'<rect x="{x}" y="{y}" width="{_CELL_W}" height="{_CELL_H}" '
                        f'fill="{fill}" stroke="#fff"/>')
            if label:
                body.append(f'<text x="{x + _CELL_W / 2}" y="{y + 15}" text-anchor="middle" '
                            f'fill="{ink}">{label}</text>')
    return _svg(width, height, body)


def bar_chart_svg(summary: Summary, metric: str, sequence: str = ANY, frame_type: str = ALL) -> str:
    """Per-model mean with +/- SEM error bars for one sequence (or the marginal)."""
    items = [(m, summary.get((m, sequence, metric, frame_type))) for m in summary.models]
    items = [(m, c) for m, c in items if c is not None and not c.empty]
    plot_h, bar_w, gap = 200, 36, 14
    width = 60 + len(items) * (bar_w + gap) + 20
    height = 40 + plot_h + 80
    lows = [c.mean - c.sem for _, c in items] + [0.0]
    highs = [c.mean + c.sem for _, c in items] + [0.0]
    lo, hi = min(lows), max(highs)
    if hi <= lo:
        hi = lo + 1.0
    y0 = 40

    def y(v):
        return y0 + plot_h * (hi - v) / (hi - lo)

    title = "all sequences" if sequence == ANY else sequence
    body = [f'<text x="10" y="20" font-size="14">{escape(metric)}: {escape(title)} '
            f'({escape(frame_type)} frames)</text>',
            f'<line x1="55" y1="{y(0):.1f}" x2="{width - 10}" y2="{y(0):.1f}" stroke="#000"/>',
            f'<line x1="55" y1="{y0}" x2="55" y2="{y0 + plot_h}" stroke="#000"/>',
            f'<text x="50" y="{y(hi) + 4:.1f}" text-anchor="end">{hi:.3g}</text>',
            f'<text x="50" y="{y(lo) + 4:.1f}" text-anchor="end">{lo:.3g}</text>']
    for k, (m, c) in enumerate(items):
        x = 60 + k * (bar_w + gap)
        top, bot = sorted((y(c.mean), y(0.0)))
        cx = x + bar_w / 2
        body.append(f'<rect x="{x}" y="{top:.1f}" width="{bar_w}" height="{bot - top:.1f}" fill="#4a7ab5"/>')
        body.append(f'<line x1="{cx}" y1="{y(c.mean + c.sem):.1f}" x2="{cx}" '
                    f'y2="{y(c.mean - c.sem):.1f}" stroke="#000"/>')
        for v in (c.mean + c.sem, c.mean - c.sem):
            body.append(f'<line x1="{cx - 6}" y1="{y(v):.1f}" x2="{cx + 6}" y2="{y(v):.1f}" stroke="#000"/>')
        ly = y0 + plot_h + 14
        body.append(f'<text x="{cx}" y="{ly}" text-anchor="end" '
                    f'transform="rotate(-45 {cx} {ly})">{escape(m)}</text>')
    return _svg(width, height, body)


def write_plots(summary: Summary, out_dir) -> list:
    """One heatmap and one marginal bar chart per metric; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in summary.metrics:
        for name, text in ((f"heatmap_{metric}.svg", heatmap_svg(summary, metric)),
                           (f"bars_{metric}.svg", bar_chart_svg(summary, metric))):
            p = out / name
            p.write_text(text, encoding="utf-8")
            written.append(p)
    return written
