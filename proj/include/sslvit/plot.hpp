#pragma once

#include <string>
#include <vector>

#include "sslvit/trainer.hpp"

namespace sslvit {

struct LossSeries {
    std::string name;  // legend label, usually the file basename
    std::vector<LossRecord> rows;
};

/// Parses a loss CSV produced by the trainer. Empty component fields load as
/// absent; a header-only or empty file is an error.
LossSeries parse_loss_csv(const std::string& path);

/// One polyline of per-epoch mean total loss per series, inverted y axis,
/// axis labels and a legend. Pure text output, stable across runs.
std::string render_loss_svg(const std::vector<LossSeries>& series);

}  // namespace sslvit
