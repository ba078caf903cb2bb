"""Matplotlib figure helpers; SVG output is made reproducible byte-for-byte."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.2),
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "lines.markersize": 4,
    "legend.fontsize": 7,
    "svg.hashsalt": "composite-csi",
    "svg.fonttype": "path",
}

X_AXIS = {
    "lsfc_vs_spacing": ("spacing", r"antenna spacing $\xi/\lambda$"),
    "lsfc_vs_M": ("M", "number of BS antennas $M$"),
    "em_vs_proposed": ("iteration", "EM iteration"),
    "ssfc_vs_snr_order": ("snr_db", "SNR (dB)"),
    "theory_mse_surface": ("m", "modeling order $m$"),
}


def _label(keys, skip):
    return ", ".join(f"{k}={v}" for k, v in keys if k not in skip)


def line_plot(rows, scenario, metric, path):
    """One figure: ``metric`` against the scenario's x key, one line per
    remaining key combination; rows without an x value become flat lines."""
    xkey, xlabel = X_AXIS[scenario]
    series, flat = {}, {}
    for r in rows:
        kd = r.key_dict()
        label = _label(r.keys, {xkey})
        if kd.get(xkey, "") == "":
            flat[label] = r.value
        else:
            series.setdefault(label, []).append((float(kd[xkey]), r.value, r.stderr))

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, pts in series.items():
            pts.sort()
            xs, ys, es = zip(*pts)
            ax.errorbar(xs, ys, yerr=es if any(es) else None, marker="o", label=label, capsize=2)
        for label, v in flat.items():
            ax.axhline(v, linestyle="--", color="k", linewidth=1.0, label=label)
        positive = [r.value for r in rows if r.value > 0]
        if metric.startswith("nmse") and positive:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(metric)
        ax.set_title(scenario)
        if series or flat:
            ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
