#include "binmhe/plot_scripts.hpp"

#include "binmhe/io.hpp"

namespace binmhe {

namespace {

std::string preamble(const std::string& csv) {
    return "#!/usr/bin/env python3\n"
           "import csv\n"
           "import os\n"
           "import matplotlib\n"
           "matplotlib.use(\"Agg\")\n"
           "import matplotlib.pyplot as plt\n\n"
           "here = os.path.dirname(os.path.abspath(__file__))\n"
           "with open(os.path.join(here, \"" +
           csv +
           "\")) as f:\n"
           "    rows = list(csv.DictReader(f))\n\n";
}

std::string sweep_body(const std::string& xlabel, const std::string& ycol, const std::string& ylabel,
                       const std::string& out) {
    return "x = [float(r[\"value\"]) for r in rows]\n"
           "y = [float(r[\"" +
           ycol +
           "\"]) for r in rows]\n"
           "fig, ax = plt.subplots()\n"
           "ax.plot(x, y, \"o-\")\n"
           "ax.set_xlabel(\"" +
           xlabel + "\")\nax.set_ylabel(\"" + ylabel +
           "\")\n"
           "ax.grid(True)\n"
           "fig.savefig(os.path.join(here, \"" +
           out + "\"), dpi=150)\n";
}

std::string rmse_body(const std::string& out) {
    return "t = [float(r[\"time_s\"]) for r in rows]\n"
           "fig, ax = plt.subplots()\n"
           "for col in rows[0].keys():\n"
           "    if not col.startswith(\"rmse_\"):\n"
           "        continue\n"
           "    pts = [(ti, float(r[col])) for ti, r in zip(t, rows) if r[col] != \"\"]\n"
           "    ax.plot([p[0] for p in pts], [p[1] for p in pts], label=col[5:].upper())\n"
           "ax.set_xlabel(\"time [s]\")\n"
           "ax.set_ylabel(\"normalized RMSE\")\n"
           "ax.set_yscale(\"log\")\n"
           "ax.legend()\n"
           "ax.grid(True)\n"
           "fig.savefig(os.path.join(here, \"" +
           out + "\"), dpi=150)\n";
}

}  // namespace

std::vector<PlotScript> plot_scripts() {
    std::vector<PlotScript> out;
    auto add = [&](std::string name, std::string csv, std::string body) {
        PlotScript s{name, csv, preamble(csv) + body};
        out.push_back(std::move(s));
    };
    add("fig2a", "observability_N.csv", sweep_body("N", "delta_mean", "mean delta", "fig2a.png"));
    add("fig2b", "observability_tau.csv", sweep_body("tau", "delta_mean", "mean delta", "fig2b.png"));
    add("fig5", "rmse_example1.csv", rmse_body("fig5.png"));
    add("fig6a", "armse_tau.csv", sweep_body("tau", "armse", "ARMSE", "fig6a.png"));
    add("fig6b", "armse_rho_v.csv", sweep_body("rho_V", "armse", "ARMSE", "fig6b.png"));
    add("fig8", "rmse_example2.csv", rmse_body("fig8.png"));
    return out;
}

void write_plot_scripts(const std::filesystem::path& dir) {
    for (const auto& s : plot_scripts()) write_text(dir / (s.name + ".py"), s.text);
}

}  // namespace binmhe
