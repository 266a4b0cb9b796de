//! Matplotlib scripts for the CSV tables written by the sweeps and simulations.

fn script(csv: &str, body: &str) -> String {
    format!(
        "import csv\nimport os\n\nimport matplotlib.pyplot as plt\n\n\
         here = os.path.dirname(os.path.abspath(__file__))\n\
         with open(os.path.join(here, \"{csv}\")) as fh:\n    rows = list(csv.DictReader(fh))\n\n\
         {body}\nplt.tight_layout()\nplt.savefig(os.path.join(here, \"{png}\"), dpi=150)\n",
        png = csv.replace(".csv", ".png")
    )
}

pub fn stability_sweep(csv: &str) -> String {
    script(
        csv,
        "delta = [float(r[\"delta[-]\"]) for r in rows]\n\
         h_max = [float(r[\"h_max[s]\"]) for r in rows]\n\
         plt.plot(delta, h_max, \"o-\")\n\
         plt.xlabel(\"delta\")\n\
         plt.ylabel(\"largest certified h [s]\")\n\
         plt.grid(True)\n",
    )
}

pub fn performance_sweep(csv: &str) -> String {
    script(
        csv,
        "series = {}\n\
         for r in rows:\n    if r[\"gamma[-]\"] != \"inf\":\n        series.setdefault(float(r[\"delta[-]\"]), []).append((float(r[\"h[s]\"]), float(r[\"gamma[-]\"])))\n\
         for delta, pts in sorted(series.items()):\n    plt.semilogy([p[0] for p in pts], [p[1] for p in pts], \"o-\", label=f\"delta = {delta:g}\")\n\
         plt.xlabel(\"h [s]\")\n\
         plt.ylabel(\"certified gain bound\")\n\
         plt.legend()\n\
         plt.grid(True, which=\"both\")\n",
    )
}

pub fn trace(csv: &str) -> String {
    script(
        csv,
        "t = [float(r[\"time[s]\"]) for r in rows]\n\
         fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7, 7))\n\
         for name in (\"d\", \"u\", \"held\"):\n    axes[0].plot(t, [float(r[name]) for r in rows], label=name)\n\
         for name in (\"y\", \"z\"):\n    axes[1].plot(t, [float(r[name]) for r in rows], label=name)\n\
         for name in (\"v\", \"w\"):\n    axes[2].plot(t, [float(r[name]) for r in rows], label=name)\n\
         for ax in axes:\n    ax.legend()\n    ax.grid(True)\n\
         axes[-1].set_xlabel(\"time [s]\")\n",
    )
}
