#include "deal/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace deal {

namespace {

// Order-independent mean and sample standard deviation.
std::pair<double, double> mean_std(std::vector<double> values)
{
    std::sort(values.begin(), values.end());
    const double n = double(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2)
        return {mean, 0.0};
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

std::string series_label(const ALRunLedger& l)
{
    return l.pam_enabled ? l.strategy : l.strategy + " (no PAM)";
}

std::string fmt(const char* pattern, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

}  // namespace

const SeriesSummary* ExperimentSummary::find(const std::string& label) const
{
    for (const SeriesSummary& s : series)
        if (s.label == label)
            return &s;
    return nullptr;
}

ExperimentSummary aggregate(const std::vector<ALRunLedger>& ledgers, std::optional<double> upper_bound)
{
    if (ledgers.empty())
        throw AggregationError("aggregate: no ledgers");
    ExperimentSummary summary;
    summary.upper_bound = upper_bound;
    summary.num_classes = ledgers.front().num_classes;

    std::vector<int> grid;
    for (const auto& r : ledgers.front().rounds)
        grid.push_back(r.labeled_count);
    if (grid.empty())
        throw AggregationError("aggregate: ledger without rounds");

    std::map<std::string, std::vector<const ALRunLedger*>> groups;
    for (const ALRunLedger& l : ledgers) {
        if (l.num_classes != summary.num_classes)
            throw AggregationError("aggregate: ledgers disagree on the number of classes");
        std::vector<int> g;
        for (const auto& r : l.rounds)
            g.push_back(r.labeled_count);
        if (g != grid)
            throw AggregationError("aggregate: ledger " + l.strategy + "/seed " + std::to_string(l.seed) +
                                   " has a different stage grid");
        groups[series_label(l)].push_back(&l);
    }

    for (const auto& [label, members] : groups) {
        SeriesSummary s;
        s.label = label;
        s.strategy = members.front()->strategy;
        s.pam_enabled = members.front()->pam_enabled;
        for (const ALRunLedger* l : members)
            s.seeds.push_back(l->seed);
        std::sort(s.seeds.begin(), s.seeds.end());
        for (size_t stage = 0; stage < grid.size(); ++stage) {
            std::vector<double> miou, entropy;
            for (const ALRunLedger* l : members) {
                miou.push_back(l->rounds[stage].miou);
                entropy.push_back(l->rounds[stage].class_entropy);
            }
            StageStats st;
            st.labeled_count = grid[stage];
            st.labeled_fraction = members.front()->rounds[stage].labeled_fraction;
            std::tie(st.mean_miou, st.std_miou) = mean_std(miou);
            st.mean_class_entropy = mean_std(entropy).first;
            s.stages.push_back(st);
        }
        s.final_class_iou.assign(static_cast<size_t>(summary.num_classes), std::numeric_limits<double>::quiet_NaN());
        for (int c = 0; c < summary.num_classes; ++c) {
            std::vector<double> values;
            for (const ALRunLedger* l : members) {
                const auto& iou = l->rounds.back().class_iou;
                if (static_cast<size_t>(c) < iou.size() && !std::isnan(iou[static_cast<size_t>(c)]))
                    values.push_back(iou[static_cast<size_t>(c)]);
            }
            if (!values.empty())
                s.final_class_iou[static_cast<size_t>(c)] = mean_std(values).first;
        }
        summary.series.push_back(std::move(s));
    }

    const SeriesSummary* qbc_h = summary.find("qbc-entropy");
    const SeriesSummary* qbc_v = summary.find("qbc-vr");
    if (qbc_h && qbc_v) {
        SeriesSummary best = qbc_h->stages.back().mean_miou >= qbc_v->stages.back().mean_miou ? *qbc_h : *qbc_v;
        best.label = "qbc";
        summary.series.push_back(std::move(best));
    }

    for (const SeriesSummary& s : summary.series) {
        if (!s.pam_enabled)
            continue;
        if (const SeriesSummary* off = summary.find(s.strategy + " (no PAM)"); off && s.label == s.strategy)
            summary.pam_ablation.push_back({s.strategy, s.stages.back().mean_miou, off->stages.back().mean_miou});
    }
    return summary;
}

std::string growth_curve_svg(const ExperimentSummary& summary)
{
    if (summary.series.empty() || summary.series.front().stages.empty())
        throw AggregationError("render_growth_curve: empty summary");

    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const SeriesSummary& s : summary.series)
        for (const StageStats& st : s.stages) {
            x_lo = std::min(x_lo, st.labeled_fraction);
            x_hi = std::max(x_hi, st.labeled_fraction);
            y_lo = std::min(y_lo, st.mean_miou - st.std_miou);
            y_hi = std::max(y_hi, st.mean_miou + st.std_miou);
        }
    if (summary.upper_bound) {
        y_lo = std::min(y_lo, *summary.upper_bound);
        y_hi = std::max(y_hi, *summary.upper_bound);
    }
    if (x_hi <= x_lo)
        x_hi = x_lo + 0.01;
    y_lo = std::max(0.0, std::floor(y_lo * 20.0) / 20.0);
    y_hi = std::min(1.0, std::ceil(y_hi * 20.0) / 20.0);
    if (y_hi <= y_lo)
        y_hi = std::min(1.0, y_lo + 0.05), y_lo = y_hi - 0.05;

    const double width = 640, height = 420, left = 70, right = 180, top = 30, bottom = 60;
    const double pw = width - left - right, ph = height - top - bottom;
    const auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
    const auto py = [&](double y) { return top + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double x = x_lo + (x_hi - x_lo) * i / 4.0;
        const double y = y_lo + (y_hi - y_lo) * i / 4.0;
        svg << "<text x=\"" << fmt("%.1f", px(x)) << "\" y=\"" << fmt("%.1f", top + ph + 18)
            << "\" text-anchor=\"middle\">" << fmt("%.1f%%", 100.0 * x) << "</text>\n";
        svg << "<text x=\"" << fmt("%.1f", left - 6) << "\" y=\"" << fmt("%.1f", py(y) + 4)
            << "\" text-anchor=\"end\">" << fmt("%.3f", y) << "</text>\n";
        svg << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << fmt("%.1f", py(y)) << "\" y2=\""
            << fmt("%.1f", py(y)) << "\" stroke=\"#dddddd\"/>\n";
    }
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 15
        << "\" text-anchor=\"middle\">labeled fraction</text>\n";
    svg << "<text x=\"18\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << top + ph / 2 << ")\">mIoU</text>\n";

    for (size_t i = 0; i < summary.series.size(); ++i) {
        const SeriesSummary& s = summary.series[i];
        const char* color = palette[i % (sizeof palette / sizeof *palette)];
        std::ostringstream band, line;
        for (const StageStats& st : s.stages)
            band << fmt("%.2f", px(st.labeled_fraction)) << ',' << fmt("%.2f", py(st.mean_miou + st.std_miou)) << ' ';
        for (auto it = s.stages.rbegin(); it != s.stages.rend(); ++it)
            band << fmt("%.2f", px(it->labeled_fraction)) << ',' << fmt("%.2f", py(it->mean_miou - it->std_miou)) << ' ';
        for (const StageStats& st : s.stages)
            line << fmt("%.2f", px(st.labeled_fraction)) << ',' << fmt("%.2f", py(st.mean_miou)) << ' ';
        svg << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.15\"/>\n";
        svg << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        const double ly = top + 14 + 18 * double(i);
        svg << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 36 << "\" y1=\"" << ly << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">" << s.label << "</text>\n";
    }
    if (summary.upper_bound) {
        const double y = py(*summary.upper_bound);
        svg << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << fmt("%.2f", y) << "\" y2=\""
            << fmt("%.2f", y) << "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
        const double ly = top + 14 + 18 * double(summary.series.size());
        svg << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">full data</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void render_growth_curve(const ExperimentSummary& summary, const std::filesystem::path& out_path)
{
    const std::string svg = growth_curve_svg(summary);
    std::ofstream out(out_path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + out_path.string());
    out << svg;
    if (!out)
        throw IoError("failed writing " + out_path.string());
}

std::string per_class_table(const ExperimentSummary& summary, const std::vector<std::string>& class_names)
{
    std::ostringstream md;
    md << "| Method |";
    for (int c = 0; c < summary.num_classes; ++c)
        md << ' '
           << (static_cast<size_t>(c) < class_names.size() ? class_names[static_cast<size_t>(c)]
                                                           : "class " + std::to_string(c))
           << " |";
    md << " mIoU |\n|---|";
    for (int c = 0; c <= summary.num_classes; ++c)
        md << "---|";
    md << '\n';
    for (const SeriesSummary& s : summary.series) {
        md << "| " << s.label << " |";
        for (double v : s.final_class_iou)
            md << ' ' << (std::isnan(v) ? std::string("-") : fmt("%.2f", 100.0 * v)) << " |";
        md << ' ' << fmt("%.2f", 100.0 * s.stages.back().mean_miou) << " |\n";
    }
    return md.str();
}

}  // namespace deal
