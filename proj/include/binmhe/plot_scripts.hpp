#pragma once

// Standalone matplotlib scripts, one per figure, reading the CSVs written by
// the reproduce-paper command from their own directory.

#include <filesystem>
#include <string>
#include <vector>

namespace binmhe {

struct PlotScript {
    std::string name;  ///< file stem, e.g. "fig5"
    std::string csv;   ///< input CSV in the same directory
    std::string text;
};

std::vector<PlotScript> plot_scripts();

/// Writes <dir>/<name>.py for every script.
void write_plot_scripts(const std::filesystem::path& dir);

}  // namespace binmhe
