"""Self-contained SVG curve plots of a :class:`ResultTable`.

Glyphs are written as paths, so the files need no fonts or external assets.
Colour encodes the swept parameter held fixed per curve, line style encodes
the method.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .results import ResultTable  # noqa: E402

_STYLE = {
    "mc": dict(linestyle="-", marker=None),
    "beta": dict(linestyle="--", marker=None),
    "proposed": dict(linestyle="none", marker="o", markersize=4, markerfacecolor="none"),
    "gilpelaez": dict(linestyle=":", marker=None),
}

_RC = {
    "svg.fonttype": "path",
    "svg.hashsalt": "uplink-meta",   # stable element ids
    "font.size": 9,
    "axes.linewidth": 0.6,
    "lines.linewidth": 1.2,
}


def _curves(table: ResultTable, method, key, xattr, fixed: dict):
    pts = {}
    for r in table.rows:
        if r.method != method or r.failed:
            continue
        if any(getattr(r, k) != v for k, v in fixed.items()):
            continue
        pts.setdefault(getattr(r, key), []).append((getattr(r, xattr), r.value))
    return {k: sorted(v) for k, v in sorted(pts.items())}


def _figure(table, path, xattr, key, fixed, xlabel, key_label, title):
    methods = [m for m in ("mc", "beta", "proposed", "gilpelaez") if any(r.method == m for r in table.rows)]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        cmap = plt.get_cmap("viridis")
        keys = sorted({getattr(r, key) for r in table.rows
                       if all(getattr(r, k) == v for k, v in fixed.items())})
        colors = {k: cmap(i / max(1, len(keys) - 1) * 0.9) for i, k in enumerate(keys)}
        for m in methods:
            for k, pts in _curves(table, m, key, xattr, fixed).items():
                xs, ys = zip(*pts)
                ax.plot(xs, ys, color=colors[k], **_STYLE[m])
        # two legends: colour for the curve parameter, style for the method
        handles = [plt.Line2D([], [], color=colors[k], label=f"{key_label} = {k:g}") for k in keys]
        leg = ax.legend(handles=handles, loc="upper left", bbox_to_anchor=(1.01, 1.0), fontsize=7, frameon=False)
        ax.add_artist(leg)
        mh = [plt.Line2D([], [], color="k", label=m, **_STYLE[m]) for m in methods]
        ax.legend(handles=mh, loc="lower left", bbox_to_anchor=(1.01, 0.0), fontsize=7, frameon=False)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("meta distribution")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(title, fontsize=9)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)


def write_figures(table: ResultTable, directory: str | Path) -> list[Path]:
    """Write one SVG per (epsilon, fixed axis); returns the paths written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    eps = sorted({r.epsilon for r in table.rows})
    gammas = sorted({r.gamma for r in table.rows})
    out = []
    for e in eps:
        p = directory / f"meta_eps{e:g}_vs_gamma.svg"
        _figure(table, p, "gamma", "theta_db", {"epsilon": e}, r"reliability threshold $\gamma$",
                "θ [dB]", f"ε = {e:g}")
        out.append(p)
        p = directory / f"meta_eps{e:g}_vs_theta.svg"
        _figure(table, p, "theta_db", "gamma", {"epsilon": e}, r"SINR threshold $\theta$ [dB]",
                "γ", f"ε = {e:g}")
        out.append(p)
    if len(eps) > 1:
        for g in gammas:
            p = directory / f"meta_gamma{g:g}_vs_epsilon.svg"
            _figure(table, p, "epsilon", "theta_db", {"gamma": g}, r"compensation factor $\epsilon$",
                    "θ [dB]", f"γ = {g:g}")
            out.append(p)
    return out
