#include "cura/report.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace cura {

std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string TextTable::render() const {
    std::vector<std::size_t> width(header_.size());
    for (std::size_t c = 0; c < header_.size(); ++c) width[c] = header_[c].size();
    for (const auto& row : rows_)
        for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());

    std::ostringstream os;
    auto emit = [&](const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t c = 0; c < width.size(); ++c) {
            const std::string& cell = c < cells.size() ? cells[c] : std::string();
            line += cell;
            if (c + 1 < width.size()) line += std::string(width[c] - cell.size() + 2, ' ');
        }
        os << line << '\n';
    };
    emit(header_);
    std::vector<std::string> rule;
    for (auto w : width) rule.emplace_back(w, '-');
    emit(rule);
    for (const auto& row : rows_) emit(row);
    return os.str();
}

std::vector<std::pair<std::string, double>> metric_lines(const Metrics& m) {
    std::vector<std::pair<std::string, double>> out;
    if (m.r2) out.emplace_back("r2", *m.r2);
    if (m.f1) out.emplace_back("f1", *m.f1);
    if (m.accuracy) out.emplace_back("accuracy", *m.accuracy);
    if (m.mae) out.emplace_back("mae", *m.mae);
    if (m.mse) out.emplace_back("mse", *m.mse);
    return out;
}

std::string format_train_report(const TrainReport& report, const CuraConfig& config) {
    std::ostringstream os;
    os << "seed=" << report.seed << '\n';
    os << "params=" << report.param_count << '\n';
    os << "epochs=" << report.epoch_losses.size() << '\n';
    if (!report.epoch_losses.empty()) os << "final_loss=" << format_number(report.epoch_losses.back()) << '\n';
    for (const auto& [k, v] : metric_lines(report.test)) os << k << '=' << format_number(v) << '\n';
    os << "efficiency=" << format_number(report.efficiency) << '\n';
    os << "wall_seconds=" << format_number(report.wall_seconds) << '\n';
    for (std::size_t e = 0; e < report.epoch_losses.size(); ++e)
        os << "loss." << e + 1 << '=' << format_number(report.epoch_losses[e]) << '\n';
    os << '\n';

    TextTable t({"metric", "value"});
    t.add_row({"gating", to_string(config.gating)});
    t.add_row({"gate_activation", to_string(config.gate_activation)});
    t.add_row({"nonlinearity", to_string(config.nonlinearity)});
    t.add_row({"filter", to_string(config.filter)});
    t.add_row({"params", std::to_string(report.param_count)});
    for (const auto& [k, v] : metric_lines(report.test)) t.add_row({k, format_number(v)});
    t.add_row({"efficiency", format_number(report.efficiency)});
    os << t.render();
    return os.str();
}

std::string format_eval_report(const Metrics& m, std::size_t param_count) {
    std::ostringstream os;
    const double eta = parameter_efficiency(primary_metric_percent(m), param_count);
    for (const auto& [k, v] : metric_lines(m)) os << k << '=' << format_number(v) << '\n';
    os << "params=" << param_count << '\n';
    os << "efficiency=" << format_number(eta) << '\n';
    os << '\n';
    TextTable t({"metric", "value"});
    for (const auto& [k, v] : metric_lines(m)) t.add_row({k, format_number(v)});
    t.add_row({"params", std::to_string(param_count)});
    t.add_row({"efficiency", format_number(eta)});
    os << t.render();
    return os.str();
}

std::string format_efficiency_table(const std::vector<EfficiencyCheck>& checks) {
    std::ostringstream os;
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const auto& c = checks[i];
        const char* status = c.match == PrintedMatch::rounded     ? "rounded"
                             : c.match == PrintedMatch::truncated ? "truncated"
                                                                  : "DISCREPANCY";
        flagged += c.match == PrintedMatch::discrepancy;
        os << "row." << i << ".dataset=" << c.row.dataset << '\n'
           << "row." << i << ".model=" << c.row.model << '\n'
           << "row." << i << ".eta=" << format_number(c.eta) << '\n'
           << "row." << i << ".printed=" << c.row.printed << '\n'
           << "row." << i << ".match=" << status << '\n';
    }
    os << "discrepancies=" << flagged << '\n' << '\n';
    TextTable t({"dataset", "model", "params", "metric%", "eta", "printed", "check"});
    for (const auto& c : checks) {
        const char* status = c.match == PrintedMatch::rounded     ? "ok (rounded)"
                             : c.match == PrintedMatch::truncated ? "ok (truncated)"
                                                                  : "DISCREPANCY";
        t.add_row({c.row.dataset, c.row.model, std::to_string(c.row.params), format_number(c.row.metric_percent),
                   format_number(c.eta), c.row.printed, status});
    }
    os << t.render();
    return os.str();
}

}  // namespace cura
