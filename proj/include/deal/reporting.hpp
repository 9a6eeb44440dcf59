#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deal/al_harness.hpp"

namespace deal {

struct StageStats {
    int labeled_count = 0;
    double labeled_fraction = 0;
    double mean_miou = 0;
    double std_miou = 0;  // sample standard deviation over seeds (0 for one seed)
    double mean_class_entropy = 0;
};

/// One curve: every ledger of a (strategy, PAM flag) pair.
struct SeriesSummary {
    std::string label;
    std::string strategy;
    bool pam_enabled = true;
    std::vector<std::uint64_t> seeds;
    std::vector<StageStats> stages;
    std::vector<double> final_class_iou;  // per class mean at the last stage, NaN if never defined
};

struct PamAblation {
    std::string strategy;
    double with_pam = 0;     // final-stage mean mIoU
    double without_pam = 0;
};

struct ExperimentSummary {
    int num_classes = 0;
    std::vector<SeriesSummary> series;
    std::vector<PamAblation> pam_ablation;
    std::optional<double> upper_bound;  // full-data mIoU, drawn dashed

    const SeriesSummary* find(const std::string& label) const;
};

/// Groups ledgers by (strategy, PAM flag), averaging stage-wise over seeds.
/// When both QBC modes are present an extra "qbc" series repeats the better
/// one (by final mean mIoU). Throws AggregationError when stage grids differ.
ExperimentSummary aggregate(const std::vector<ALRunLedger>& ledgers, std::optional<double> upper_bound = {});

/// SVG growth curves: mean mIoU against labeled fraction, shaded +-1 std.
void render_growth_curve(const ExperimentSummary& summary, const std::filesystem::path& out_path);
std::string growth_curve_svg(const ExperimentSummary& summary);

/// Markdown table of final-stage per-class IoU (percent) plus mIoU per series.
std::string per_class_table(const ExperimentSummary& summary, const std::vector<std::string>& class_names = {});

}  // namespace deal
