"""Report figures rendered next to the CSV output.

Two files per run: <stem>_waf.png (running/cumulative WAF plus the
throughput proxy on a twin axis) and <stem>_blocks.png (region occupancy
over time plus the final block-utilization histogram).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_report_figures(samples, utilization_hist, stem: str) -> list:
    paths = []
    windows = [s.window for s in samples]

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(windows, [s.running_waf for s in samples], label="running WAF", color="tab:red")
    ax.plot(windows, [s.cumulative_waf for s in samples], label="cumulative WAF",
            color="tab:orange", linestyle="--")
    ax.set_xlabel("window")
    ax.set_ylabel("WAF")
    ax.set_ylim(bottom=0.0)
    ax2 = ax.twinx()
    ax2.plot(windows, [s.throughput_proxy for s in samples], label="throughput proxy",
             color="tab:blue", alpha=0.7)
    ax2.set_ylabel("logical pages / simulated second")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="upper left", fontsize=8)
    fig.tight_layout()
    path = f"{stem}_waf.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    paths.append(path)

    fig, (ax_r, ax_h) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax_r.stackplot(windows,
                   [s.fa_blocks for s in samples],
                   [s.normal_blocks for s in samples],
                   [s.free_blocks for s in samples],
                   labels=["pre-allocated", "normal", "free"],
                   colors=["tab:green", "tab:gray", "tab:cyan"], alpha=0.8)
    ax_r.plot(windows, [s.mid_mass * (s.fa_blocks + s.normal_blocks + s.free_blocks)
                        for s in samples], color="black", linewidth=0.8,
              label="mid-utilization mass (scaled)")
    ax_r.set_xlabel("window")
    ax_r.set_ylabel("blocks")
    ax_r.legend(loc="upper left", fontsize=7)
    bins = len(utilization_hist)
    centers = [(i + 0.5) / bins for i in range(bins)]
    ax_h.bar(centers, utilization_hist, width=0.9 / bins, color="tab:purple")
    ax_h.set_xlabel("valid-page ratio (final)")
    ax_h.set_ylabel("non-free blocks")
    fig.tight_layout()
    path = f"{stem}_blocks.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    paths.append(path)
    return paths
